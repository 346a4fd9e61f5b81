#pragma once

// Joint event-time / structure model over a stream of snapshots.

#include <Eigen/Dense>

#include <random>
#include <string>
#include <vector>

#include "evokg/autodiff.hpp"
#include "evokg/config.hpp"
#include "evokg/graph_encoder.hpp"
#include "evokg/recurrent_state.hpp"
#include "evokg/structure_head.hpp"
#include "evokg/time_head.hpp"
#include "evokg/tkg_store.hpp"

namespace evokg {

struct ModelParams {
  ad::Var entity_temporal;      // d_t x |E|, static temporal embeddings
  ad::Var entity_structural;    // d_s x |E|
  ad::Var relation_structural;  // d_s x |R|
  std::vector<RelationalLayerParams> temporal_encoder;
  std::vector<RelationalLayerParams> structural_encoder;
  ElmanCell temporal_entity_rnn;
  ElmanCell temporal_relation_rnn;
  ElmanCell structural_entity_rnn;
  ElmanCell structural_relation_rnn;
  TimeHeadParams time;
  StructureHeadParams structure;
};

struct NamedParameter {
  std::string name;  // dotted; the first component is the group
  ad::Var var;
};

struct TickLoss {
  ad::Var total;  // lambda1 * L_iet + lambda2 * L_triple; undefined when nothing contributes
  double time_nll = 0.0;
  double triple_nll = 0.0;
  std::size_t time_events = 0;
  std::size_t time_skipped = 0;
  std::size_t triple_events = 0;
};

struct LossWeights {
  double time = 1.0;
  double triple = 1.0;
};

class Model {
 public:
  Model(const ModelConfig& config, int num_entities, int num_relations);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  int num_entities() const { return num_entities_; }
  int num_relations() const { return num_relations_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  // Stable order; used by the optimizer, checkpoints and gradient checks.
  std::vector<NamedParameter> parameters() const;

  RecurrentState initial_state() const;

  // Loss of the snapshot's events given history strictly before its tick.
  // Terms with zero weight are not evaluated.
  TickLoss tick_loss(const RecurrentState& state, const Snapshot& snapshot, LossWeights weights,
                     const Dropout* dropout = nullptr) const;

  // Encodes the snapshot, advances recurrent states and the tracker.
  void advance(RecurrentState& state, const Snapshot& snapshot,
               const Dropout* dropout = nullptr) const;

  // Value-only inputs for one event's time and structure terms.
  Eigen::VectorXd time_context(const RecurrentState& state, int subject, int relation,
                               int object) const;
  Eigen::VectorXd subject_repr(const RecurrentState& state, int entity) const;
  Eigen::VectorXd relation_repr(const RecurrentState& state, int relation) const;
  Eigen::VectorXd summary(const RecurrentState& state) const;

  // Scores for (s, r, o', tick) over every candidate o'.
  Eigen::VectorXd score_objects(const RecurrentState& state, int subject, int relation, Tick tick,
                                bool use_time_term) const;

  // Inter-event times for a candidate with the no-history fallback applied
  // when neither branch has history.
  InterEventTimes scoring_taus(const RecurrentState& state, const Quadruple& q) const;

  TimeHeadParams& time_head() { return params_.time; }

 private:
  TripleInputs triple_inputs(const RecurrentState& state, std::span<const Quadruple> events) const;
  ad::Var time_contexts(const RecurrentState& state, std::span<const Quadruple> events) const;

  ModelConfig config_;
  int num_entities_;
  int num_relations_;
  ModelParams params_;
};

}  // namespace evokg
