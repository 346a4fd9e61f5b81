#pragma once

// One-snapshot relational neighbourhood aggregation.
//
// For every entity i incident to the snapshot:
//   h_i' = act( sum_r sum_{j in N(i,r)} (1/nu_ij) * W_r h_j + W_0 h_i )
// Each edge (s, r, o) sends s -> o through W_r and o -> s through a distinct
// reverse matrix W_{R+r}. nu is either a function of the pair's elapsed time
// (temporal weighting) or the size of the (i, r, direction) bucket
// (structural weighting).

#include <cstdint>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "evokg/autodiff.hpp"
#include "evokg/tkg_store.hpp"

namespace evokg {

enum class Weighting { kTemporal, kStructural };
enum class Activation { kIdentity, kRelu, kTanh };

// nu for temporal weighting: 1 + log(1 + tau), tau in ticks.
double temporal_nu(double tau);

struct RelationalLayerParams {
  // 2 * num_relations entries; entry r is forward, entry R + r is reverse.
  // Each stores its diagonal blocks side by side: (out/B) x in.
  std::vector<ad::Var> relation_blocks;
  ad::Var self_loop;  // out x in
  int num_blocks = 1;
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::kRelu;

  static RelationalLayerParams glorot(int in_dim, int out_dim, int num_relations, int num_blocks,
                                      Activation activation, std::mt19937_64& rng);

  // Dense (out x in) view of relation matrix `index`.
  ad::Matrix dense_relation(std::size_t index) const;
  int num_relations() const { return static_cast<int>(relation_blocks.size() / 2); }
};

struct EncoderInput {
  std::span<const Quadruple> edges;
  std::vector<int> entities;  // sorted; column k of node_states belongs to entities[k]
  ad::Var node_states;        // d x entities.size()
  Weighting weighting = Weighting::kStructural;
  // Temporal mode: elapsed ticks per unordered pair (HistoryTracker::pair_key);
  // pairs without an entry use fallback_tau.
  std::unordered_map<std::uint64_t, double> pair_tau;
  double fallback_tau = 1.0;
};

// Sorted distinct subjects and objects of the events.
std::vector<int> incident_entities(std::span<const Quadruple> events);

// One directed message; indices are local columns.
struct Message {
  int target = 0;
  int source = 0;
  int relation = 0;  // 0 .. 2R-1
  double coef = 0.0;
};

// Messages with their 1/nu coefficients, in deterministic edge order.
std::vector<Message> build_messages(const EncoderInput& input, int num_relations);

// Sum of weighted messages plus the self loop, before the activation.
ad::Var relational_aggregate(const ad::Var& states, std::span<const Message> messages,
                             const RelationalLayerParams& params);

// One layer; the output columns follow input.entities.
ad::Var aggregate_layer(const EncoderInput& input, const RelationalLayerParams& params);

// L layers composed; coefficients are shared across layers.
ad::Var encode(const EncoderInput& input, std::span<const RelationalLayerParams> layers);

ad::Var apply_activation(const ad::Var& x, Activation act);

}  // namespace evokg
