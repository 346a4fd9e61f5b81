#include "evokg/model.hpp"

#include <cmath>
#include <stdexcept>

#include "evokg/errors.hpp"
#include "evokg/nn.hpp"

namespace evokg {

Model::Model(const ModelConfig& config, int num_entities, int num_relations)
    : config_(config), num_entities_(num_entities), num_relations_(num_relations) {
  config_.validate();
  if (num_entities < 1 || num_relations < 1)
    throw std::invalid_argument("model: need at least one entity and one relation");
  std::mt19937_64 rng(config_.seed);
  const int dt = config_.temporal_dim;
  const int ds = config_.structural_dim;
  auto& p = params_;
  p.entity_temporal = ad::Var::parameter(glorot_uniform(dt, num_entities, rng));
  p.entity_structural = ad::Var::parameter(glorot_uniform(ds, num_entities, rng));
  p.relation_structural = ad::Var::parameter(glorot_uniform(ds, num_relations, rng));
  for (int l = 0; l < config_.layers; ++l) {
    const auto act = l + 1 < config_.layers ? Activation::kRelu : Activation::kIdentity;
    p.temporal_encoder.push_back(
        RelationalLayerParams::glorot(dt, dt, num_relations, config_.blocks, act, rng));
  }
  for (int l = 0; l < config_.layers; ++l) {
    const auto act = l + 1 < config_.layers ? Activation::kRelu : Activation::kIdentity;
    p.structural_encoder.push_back(
        RelationalLayerParams::glorot(ds, ds, num_relations, config_.blocks, act, rng));
  }
  p.temporal_entity_rnn = ElmanCell::glorot(dt, dt, rng);
  p.temporal_relation_rnn = ElmanCell::glorot(dt, dt, rng);
  p.structural_entity_rnn = ElmanCell::glorot(ds, ds, rng);
  p.structural_relation_rnn = ElmanCell::glorot(ds, ds, rng);
  p.time.pair = MixtureHead::glorot(3 * dt, dt, config_.components, rng);
  p.time.min = MixtureHead::glorot(3 * dt, dt, config_.components, rng);
  p.time.alpha = config_.effective_alpha();
  p.time.sigma = {config_.sigma_floor, config_.sigma_ceiling};
  p.structure = StructureHeadParams::glorot(2 * ds, num_entities, num_relations, rng);
}

std::vector<NamedParameter> Model::parameters() const {
  std::vector<NamedParameter> out;
  const auto& p = params_;
  out.push_back({"static.entity_temporal", p.entity_temporal});
  out.push_back({"static.entity_structural", p.entity_structural});
  out.push_back({"static.relation_structural", p.relation_structural});
  auto encoder = [&](const std::string& prefix, const std::vector<RelationalLayerParams>& layers) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string base = prefix + ".layer" + std::to_string(l);
      for (std::size_t r = 0; r < layers[l].relation_blocks.size(); ++r)
        out.push_back({base + ".relation" + std::to_string(r), layers[l].relation_blocks[r]});
      out.push_back({base + ".self_loop", layers[l].self_loop});
    }
  };
  encoder("encoder_temporal", p.temporal_encoder);
  encoder("encoder_structural", p.structural_encoder);
  auto cell = [&](const std::string& prefix, const ElmanCell& c) {
    out.push_back({prefix + ".input_weight", c.input_weight});
    out.push_back({prefix + ".hidden_weight", c.hidden_weight});
    out.push_back({prefix + ".bias", c.bias});
  };
  cell("rnn_temporal_entity", p.temporal_entity_rnn);
  cell("rnn_temporal_relation", p.temporal_relation_rnn);
  cell("rnn_structural_entity", p.structural_entity_rnn);
  cell("rnn_structural_relation", p.structural_relation_rnn);
  auto mlp = [&](const std::string& prefix, const Perceptron& m) {
    out.push_back({prefix + ".hidden_weight", m.hidden_weight});
    out.push_back({prefix + ".hidden_bias", m.hidden_bias});
    out.push_back({prefix + ".out_weight", m.out_weight});
    out.push_back({prefix + ".out_bias", m.out_bias});
  };
  mlp("time_pair.weight", p.time.pair.weight);
  mlp("time_pair.mean", p.time.pair.mean);
  mlp("time_pair.log_stddev", p.time.pair.log_stddev);
  mlp("time_min.weight", p.time.min.weight);
  mlp("time_min.mean", p.time.min.mean);
  mlp("time_min.log_stddev", p.time.min.log_stddev);
  mlp("structure.object", p.structure.object);
  mlp("structure.relation", p.structure.relation);
  mlp("structure.subject", p.structure.subject);
  return out;
}

RecurrentState Model::initial_state() const {
  return RecurrentState(config_.temporal_dim, config_.structural_dim, num_entities_,
                        num_relations_);
}

ad::Var Model::time_contexts(const RecurrentState& state, std::span<const Quadruple> events) const {
  std::vector<int> s, r, o;
  for (const auto& q : events) {
    s.push_back(q.subject);
    r.push_back(q.relation);
    o.push_back(q.object);
  }
  const ad::Var parts[] = {state.entity_temporal.gather(s), state.relation_temporal.gather(r),
                           state.entity_temporal.gather(o)};
  return ad::vcat(parts);
}

TripleInputs Model::triple_inputs(const RecurrentState& state,
                                  std::span<const Quadruple> events) const {
  std::vector<int> s, r;
  for (const auto& q : events) {
    s.push_back(q.subject);
    r.push_back(q.relation);
  }
  const ad::Var subj[] = {state.entity_structural.gather(s),
                          ad::gather_cols(params_.entity_structural, s)};
  const ad::Var rel[] = {state.relation_structural.gather(r),
                         ad::gather_cols(params_.relation_structural, r)};
  const ad::Var g =
      graph_summary(state.entity_structural, params_.entity_structural, state.seen_ids);
  return {ad::vcat(subj), ad::vcat(rel),
          ad::broadcast_cols(g, static_cast<ad::Index>(events.size()))};
}

TickLoss Model::tick_loss(const RecurrentState& state, const Snapshot& snapshot,
                          LossWeights weights, const Dropout* dropout) const {
  if (auto latest = state.tracker.latest_tick(); latest && *latest >= snapshot.tick)
    throw ContractViolation("tick_loss: state already reflects tick " + std::to_string(*latest) +
                            " >= " + std::to_string(snapshot.tick));
  TickLoss out;
  if (snapshot.events.empty()) return out;
  auto accumulate = [&](const ad::Var& term, double w) {
    ad::Var scaled = ad::scale(term, w);
    out.total = out.total.defined() ? out.total + scaled : scaled;
  };

  if (weights.time > 0.0) {
    std::vector<InterEventTimes> taus;
    taus.reserve(snapshot.events.size());
    for (const auto& q : snapshot.events) taus.push_back(state.tracker.inter_event_times(q));
    auto tl = nll_time(time_contexts(state, snapshot.events), taus, params_.time, dropout);
    out.time_skipped = tl.skipped;
    out.time_events = tl.used.size();
    if (tl.total.defined()) {
      out.time_nll = tl.total.scalar();
      accumulate(tl.total, weights.time);
    }
  }
  if (weights.triple > 0.0) {
    ad::Var nt = nll_triple(triple_inputs(state, snapshot.events), snapshot.events,
                            params_.structure, dropout);
    out.triple_nll = nt.scalar();
    out.triple_events = snapshot.events.size();
    accumulate(nt, weights.triple);
  }
  if (out.total.defined() && !std::isfinite(out.total.scalar()))
    throw NumericalError("non-finite loss at tick " + std::to_string(snapshot.tick));
  return out;
}

void Model::advance(RecurrentState& state, const Snapshot& snapshot,
                    const Dropout* dropout) const {
  if (snapshot.events.empty()) return;
  const auto entities = incident_entities(snapshot.events);

  EncoderInput temporal;
  temporal.edges = snapshot.events;
  temporal.entities = entities;
  temporal.node_states = ad::gather_cols(params_.entity_temporal, entities);
  temporal.weighting = Weighting::kTemporal;
  temporal.fallback_tau = static_cast<double>(state.tracker.elapsed_since_start(snapshot.tick));
  for (const auto& q : snapshot.events) {
    if (auto last = state.tracker.last_pair_time(q.subject, q.object))
      temporal.pair_tau[HistoryTracker::pair_key(q.subject, q.object)] =
          static_cast<double>(snapshot.tick - *last);
  }

  EncoderInput structural;
  structural.edges = snapshot.events;
  structural.entities = entities;
  structural.node_states = ad::gather_cols(params_.entity_structural, entities);
  structural.weighting = Weighting::kStructural;

  ad::Var et = encode(temporal, params_.temporal_encoder);
  ad::Var es = encode(structural, params_.structural_encoder);
  if (dropout) {
    et = dropout->apply(et);
    es = dropout->apply(es);
  }

  update_entity_states(state.entity_temporal, params_.temporal_entity_rnn, entities, et);
  update_entity_states(state.entity_structural, params_.structural_entity_rnn, entities, es);
  const auto ctx = relation_context(snapshot.events, entities);
  update_relation_states(state.relation_temporal, params_.temporal_relation_rnn, ctx, et);
  update_relation_states(state.relation_structural, params_.structural_relation_rnn, ctx, es);

  state.tracker.observe(snapshot);
  state.mark_seen(entities);
}

Eigen::VectorXd Model::time_context(const RecurrentState& state, int subject, int relation,
                                    int object) const {
  const auto dt = config_.temporal_dim;
  Eigen::VectorXd c(3 * dt);
  c << state.entity_temporal.values().col(subject), state.relation_temporal.values().col(relation),
      state.entity_temporal.values().col(object);
  return c;
}

Eigen::VectorXd Model::subject_repr(const RecurrentState& state, int entity) const {
  Eigen::VectorXd v(2 * config_.structural_dim);
  v << state.entity_structural.values().col(entity), params_.entity_structural.value().col(entity);
  return v;
}

Eigen::VectorXd Model::relation_repr(const RecurrentState& state, int relation) const {
  Eigen::VectorXd v(2 * config_.structural_dim);
  v << state.relation_structural.values().col(relation),
      params_.relation_structural.value().col(relation);
  return v;
}

Eigen::VectorXd Model::summary(const RecurrentState& state) const {
  return graph_summary(state.entity_structural, ad::Var::constant(params_.entity_structural.value()),
                       state.seen_ids)
      .value()
      .col(0);
}

InterEventTimes Model::scoring_taus(const RecurrentState& state, const Quadruple& q) const {
  auto taus = state.tracker.inter_event_times(q);
  if (!taus.pair && !taus.min) {
    const Tick fallback = state.tracker.elapsed_since_start(q.tick);
    taus.pair = fallback;
    taus.min = fallback;
  }
  return taus;
}

Eigen::VectorXd Model::score_objects(const RecurrentState& state, int subject, int relation,
                                     Tick tick, bool use_time_term) const {
  if (subject < 0 || subject >= num_entities_ || relation < 0 || relation >= num_relations_)
    throw std::out_of_range("score_objects: id out of range");
  const Eigen::VectorXd lp = object_log_probs(subject_repr(state, subject),
                                              relation_repr(state, relation), summary(state),
                                              params_.structure);
  if (!use_time_term) return evokg::score_objects(lp, nullptr);

  const auto dt = config_.temporal_dim;
  CandidateTimeTerm term;
  term.head = &params_.time;
  term.contexts.resize(3 * dt, num_entities_);
  term.contexts.topRows(dt).colwise() = state.entity_temporal.values().col(subject);
  term.contexts.middleRows(dt, dt).colwise() = state.relation_temporal.values().col(relation);
  term.contexts.bottomRows(dt) = state.entity_temporal.values();
  term.taus.reserve(static_cast<std::size_t>(num_entities_));
  for (int o = 0; o < num_entities_; ++o)
    term.taus.push_back(scoring_taus(state, {subject, relation, o, tick}));
  return evokg::score_objects(lp, &term);
}

}  // namespace evokg
