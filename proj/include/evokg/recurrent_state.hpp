#pragma once

// Dynamic entity/relation embeddings and the recurrences that evolve them.

#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "evokg/autodiff.hpp"
#include "evokg/tkg_store.hpp"

namespace evokg {

// Column-per-item dynamic state. Values are always current; columns written
// since the last truncate() additionally remember the Var that produced them,
// so gradients flow back through the recurrence until lineage is severed.
class StateTable {
 public:
  StateTable() = default;
  StateTable(int dim, int count) : values_(ad::Matrix::Zero(dim, count)) {}

  int dim() const { return static_cast<int>(values_.rows()); }
  int count() const { return static_cast<int>(values_.cols()); }
  const ad::Matrix& values() const { return values_; }

  // dim x ids.size(); differentiable w.r.t. live columns.
  ad::Var gather(std::span<const int> ids) const;

  // Column k of `columns` becomes the state of ids[k].
  void set(std::span<const int> ids, const ad::Var& columns);

  // Keep values, drop derivative lineage.
  void truncate() { live_.clear(); }
  void reset();
  bool has_lineage() const { return !live_.empty(); }

  void restore(ad::Matrix values) {
    values_ = std::move(values);
    live_.clear();
  }

 private:
  struct Source {
    ad::Var var;
    ad::Index column;
  };
  ad::Matrix values_;
  std::unordered_map<int, Source> live_;
};

// Single-layer Elman recurrence: h' = tanh(W_in x + W_hid h + b).
struct ElmanCell {
  ad::Var input_weight;   // hidden x input
  ad::Var hidden_weight;  // hidden x hidden
  ad::Var bias;           // hidden x 1

  static ElmanCell glorot(int input_dim, int hidden_dim, std::mt19937_64& rng);
  ad::Var step(const ad::Var& input, const ad::Var& hidden) const;
  int hidden_dim() const { return static_cast<int>(bias.rows()); }
};

// Dynamic state of the whole model at one instant.
struct RecurrentState {
  StateTable entity_temporal;
  StateTable entity_structural;
  StateTable relation_temporal;
  StateTable relation_structural;
  std::vector<char> seen;  // entities(G_<t)
  std::vector<int> seen_ids;  // sorted
  HistoryTracker tracker;

  RecurrentState() = default;
  RecurrentState(int temporal_dim, int structural_dim, int num_entities, int num_relations);
  void truncate();
  void mark_seen(std::span<const int> entities);
};

// Advances ids' states with `summaries` (columns ordered as ids) as input.
void update_entity_states(StateTable& table, const ElmanCell& cell, std::span<const int> ids,
                          const ad::Var& summaries);

// Sorted relations of the events and, per relation, the deduplicated local
// columns (into `entities`) of their endpoints.
struct RelationContext {
  std::vector<int> relations;
  ad::Matrix averaging;  // entities.size() x relations.size(); columns are means
};
RelationContext relation_context(std::span<const Quadruple> events, std::span<const int> entities);

// Context = entity summaries averaged per relation; absent relations untouched.
void update_relation_states(StateTable& table, const ElmanCell& cell,
                            const RelationContext& context, const ad::Var& entity_summaries);

// Element-wise max over [dynamic || static] structural columns of the seen
// entities; zero vector of length 2d when nothing has been seen.
ad::Var graph_summary(const StateTable& dynamic_structural, const ad::Var& static_structural,
                      std::span<const int> seen_ids);

}  // namespace evokg
