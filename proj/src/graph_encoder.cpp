#include "evokg/graph_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "evokg/errors.hpp"
#include "evokg/nn.hpp"

namespace evokg {

double temporal_nu(double tau) {
  if (!(tau >= 0.0)) throw std::domain_error("temporal_nu: tau must be non-negative");
  return 1.0 + std::log1p(tau);
}

RelationalLayerParams RelationalLayerParams::glorot(int in_dim, int out_dim, int num_relations,
                                                    int num_blocks, Activation activation,
                                                    std::mt19937_64& rng) {
  if (num_blocks < 1 || in_dim % num_blocks != 0 || out_dim % num_blocks != 0)
    throw std::invalid_argument("relational layer: dims " + std::to_string(in_dim) + "x" +
                                std::to_string(out_dim) + " not divisible by " +
                                std::to_string(num_blocks) + " blocks");
  RelationalLayerParams p;
  p.num_blocks = num_blocks;
  p.in_dim = in_dim;
  p.out_dim = out_dim;
  p.activation = activation;
  const int bi = in_dim / num_blocks;
  const int bo = out_dim / num_blocks;
  for (int r = 0; r < 2 * num_relations; ++r)
    p.relation_blocks.push_back(ad::Var::parameter(glorot_uniform(bo, in_dim, rng, bi, bo)));
  p.self_loop = ad::Var::parameter(glorot_uniform(out_dim, in_dim, rng));
  return p;
}

ad::Matrix RelationalLayerParams::dense_relation(std::size_t index) const {
  const auto& blocks = relation_blocks.at(index).value();
  const ad::Index bi = in_dim / num_blocks;
  const ad::Index bo = out_dim / num_blocks;
  ad::Matrix dense = ad::Matrix::Zero(out_dim, in_dim);
  for (int b = 0; b < num_blocks; ++b)
    dense.block(b * bo, b * bi, bo, bi) = blocks.middleCols(b * bi, bi);
  return dense;
}

std::vector<int> incident_entities(std::span<const Quadruple> events) {
  std::vector<int> out;
  out.reserve(events.size() * 2);
  for (const auto& q : events) {
    out.push_back(q.subject);
    out.push_back(q.object);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Message> build_messages(const EncoderInput& input, int num_relations) {
  auto local = [&](int entity) {
    auto it = std::lower_bound(input.entities.begin(), input.entities.end(), entity);
    if (it == input.entities.end() || *it != entity)
      throw std::invalid_argument("encoder: missing node state for entity " +
                                  std::to_string(entity));
    return static_cast<int>(it - input.entities.begin());
  };

  std::vector<Message> messages;
  messages.reserve(input.edges.size() * 2);
  for (const auto& q : input.edges) {
    if (q.relation < 0 || q.relation >= num_relations)
      throw std::out_of_range("encoder: relation id " + std::to_string(q.relation) +
                              " has no weight matrix");
    const int s = local(q.subject);
    const int o = local(q.object);
    double coef = 1.0;
    if (input.weighting == Weighting::kTemporal) {
      auto it = input.pair_tau.find(HistoryTracker::pair_key(q.subject, q.object));
      coef = 1.0 / temporal_nu(it == input.pair_tau.end() ? input.fallback_tau : it->second);
    }
    messages.push_back({o, s, q.relation, coef});
    messages.push_back({s, o, num_relations + q.relation, coef});
  }

  if (input.weighting == Weighting::kStructural) {
    std::map<std::pair<int, int>, int> bucket;
    for (const auto& m : messages) ++bucket[{m.target, m.relation}];
    for (auto& m : messages) m.coef = 1.0 / static_cast<double>(bucket[{m.target, m.relation}]);
  }
  return messages;
}

ad::Var relational_aggregate(const ad::Var& states, std::span<const Message> messages,
                             const RelationalLayerParams& params) {
  if (states.rows() != params.in_dim)
    throw std::invalid_argument("encoder: state dimension " + std::to_string(states.rows()) +
                                " != layer input " + std::to_string(params.in_dim));
  const int nb = params.num_blocks;
  const ad::Index bi = params.in_dim / nb;
  const ad::Index bo = params.out_dim / nb;

  struct Group {
    std::size_t relation;
    std::vector<int> source, target;
    std::vector<double> coef;
  };
  std::map<int, Group> groups;
  for (const auto& m : messages) {
    auto& g = groups[m.relation];
    g.relation = static_cast<std::size_t>(m.relation);
    g.source.push_back(m.source);
    g.target.push_back(m.target);
    g.coef.push_back(m.coef);
  }
  std::vector<Group> ordered;
  for (auto& [_, g] : groups) ordered.push_back(std::move(g));

  const ad::Matrix& h = states.value();
  ad::Matrix out = params.self_loop.value() * h;
  for (const auto& g : ordered) {
    const auto& w = params.relation_blocks[g.relation].value();
    const auto m = static_cast<ad::Index>(g.source.size());
    ad::Matrix hs(params.in_dim, m);
    for (ad::Index k = 0; k < m; ++k) hs.col(k) = h.col(g.source[k]) * g.coef[k];
    ad::Matrix msg(params.out_dim, m);
    for (int b = 0; b < nb; ++b)
      msg.middleRows(b * bo, bo).noalias() = w.middleCols(b * bi, bi) * hs.middleRows(b * bi, bi);
    for (ad::Index k = 0; k < m; ++k) out.col(g.target[k]) += msg.col(k);
  }

  std::vector<ad::Var> parents{states, params.self_loop};
  for (const auto& g : ordered) parents.push_back(params.relation_blocks[g.relation]);

  return ad::make_op(
      std::move(out), std::move(parents),
      [ordered = std::move(ordered), nb, bi, bo, in_dim = params.in_dim](ad::Node& node) {
        auto& ph = node.parents[0];
        auto& pw0 = node.parents[1];
        const ad::Matrix& dz = node.grad;
        const ad::Matrix& h = ph->value;
        if (pw0->requires_grad) pw0->accumulate(dz * h.transpose());
        if (ph->requires_grad) ph->accumulate(pw0->value.transpose() * dz);
        for (std::size_t gi = 0; gi < ordered.size(); ++gi) {
          const auto& g = ordered[gi];
          auto& pw = node.parents[2 + gi];
          const auto m = static_cast<ad::Index>(g.source.size());
          ad::Matrix gz(dz.rows(), m);
          ad::Matrix hs(in_dim, m);
          for (ad::Index k = 0; k < m; ++k) {
            gz.col(k) = dz.col(g.target[k]);
            hs.col(k) = h.col(g.source[k]) * g.coef[k];
          }
          ad::Matrix dhs(in_dim, m);
          for (int b = 0; b < nb; ++b) {
            auto gb = gz.middleRows(b * bo, bo);
            if (pw->requires_grad)
              pw->accumulate_block(0, b * bi, gb * hs.middleRows(b * bi, bi).transpose());
            dhs.middleRows(b * bi, bi).noalias() = pw->value.middleCols(b * bi, bi).transpose() * gb;
          }
          if (ph->requires_grad) {
            ph->ensure_grad();
            for (ad::Index k = 0; k < m; ++k) ph->grad.col(g.source[k]) += dhs.col(k) * g.coef[k];
          }
        }
      });
}

ad::Var apply_activation(const ad::Var& x, Activation act) {
  switch (act) {
    case Activation::kRelu:
      return ad::relu(x);
    case Activation::kTanh:
      return ad::tanh(x);
    case Activation::kIdentity:
      break;
  }
  return x;
}

ad::Var aggregate_layer(const EncoderInput& input, const RelationalLayerParams& params) {
  if (input.node_states.cols() != static_cast<ad::Index>(input.entities.size()))
    throw std::invalid_argument("encoder: one node state per entity required");
  const auto messages = build_messages(input, params.num_relations());
  return apply_activation(relational_aggregate(input.node_states, messages, params),
                          params.activation);
}

ad::Var encode(const EncoderInput& input, std::span<const RelationalLayerParams> layers) {
  if (layers.empty()) throw std::invalid_argument("encoder: at least one layer required");
  if (input.node_states.cols() != static_cast<ad::Index>(input.entities.size()))
    throw std::invalid_argument("encoder: one node state per entity required");
  const auto messages = build_messages(input, layers.front().num_relations());
  ad::Var h = input.node_states;
  for (const auto& layer : layers)
    h = apply_activation(relational_aggregate(h, messages, layer), layer.activation);
  return h;
}

}  // namespace evokg
