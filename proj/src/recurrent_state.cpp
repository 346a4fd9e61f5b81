#include "evokg/recurrent_state.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "evokg/errors.hpp"
#include "evokg/nn.hpp"

namespace evokg {

ad::Var StateTable::gather(std::span<const int> ids) const {
  ad::Matrix out(values_.rows(), static_cast<ad::Index>(ids.size()));
  std::vector<ad::Var> parents;
  std::unordered_map<const ad::Node*, int> parent_index;
  // (parent, source column) per output column; parent -1 means constant.
  std::vector<std::pair<int, ad::Index>> route(ids.size(), {-1, 0});
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const int id = ids[k];
    if (id < 0 || id >= count()) throw std::out_of_range("state id " + std::to_string(id));
    out.col(static_cast<ad::Index>(k)) = values_.col(id);
    auto it = live_.find(id);
    if (it == live_.end()) continue;
    auto [pos, inserted] =
        parent_index.emplace(it->second.var.node().get(), static_cast<int>(parents.size()));
    if (inserted) parents.push_back(it->second.var);
    route[k] = {pos->second, it->second.column};
  }
  if (parents.empty()) return ad::Var::constant(std::move(out));
  return ad::make_op(std::move(out), std::move(parents), [route = std::move(route)](ad::Node& n) {
    for (std::size_t k = 0; k < route.size(); ++k) {
      if (route[k].first < 0) continue;
      auto& p = n.parents[static_cast<std::size_t>(route[k].first)];
      if (!p->requires_grad) continue;
      p->ensure_grad();
      p->grad.col(route[k].second) += n.grad.col(static_cast<ad::Index>(k));
    }
  });
}

void StateTable::set(std::span<const int> ids, const ad::Var& columns) {
  if (columns.cols() != static_cast<ad::Index>(ids.size()) || columns.rows() != values_.rows())
    throw std::invalid_argument("StateTable::set: shape mismatch");
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto col = static_cast<ad::Index>(k);
    values_.col(ids[k]) = columns.value().col(col);
    if (columns.requires_grad())
      live_[ids[k]] = Source{columns, col};
    else
      live_.erase(ids[k]);
  }
}

void StateTable::reset() {
  values_.setZero();
  live_.clear();
}

ElmanCell ElmanCell::glorot(int input_dim, int hidden_dim, std::mt19937_64& rng) {
  ElmanCell c;
  c.input_weight = ad::Var::parameter(glorot_uniform(hidden_dim, input_dim, rng));
  c.hidden_weight = ad::Var::parameter(glorot_uniform(hidden_dim, hidden_dim, rng));
  c.bias = ad::Var::parameter(ad::Matrix::Zero(hidden_dim, 1));
  return c;
}

ad::Var ElmanCell::step(const ad::Var& input, const ad::Var& hidden) const {
  return ad::tanh(ad::add_bias(
      ad::matmul(input_weight, input) + ad::matmul(hidden_weight, hidden), bias));
}

RecurrentState::RecurrentState(int temporal_dim, int structural_dim, int num_entities,
                               int num_relations)
    : entity_temporal(temporal_dim, num_entities),
      entity_structural(structural_dim, num_entities),
      relation_temporal(temporal_dim, num_relations),
      relation_structural(structural_dim, num_relations),
      seen(static_cast<std::size_t>(num_entities), 0) {}

void RecurrentState::truncate() {
  entity_temporal.truncate();
  entity_structural.truncate();
  relation_temporal.truncate();
  relation_structural.truncate();
}

void RecurrentState::mark_seen(std::span<const int> entities) {
  bool added = false;
  for (int e : entities) {
    if (!seen[static_cast<std::size_t>(e)]) {
      seen[static_cast<std::size_t>(e)] = 1;
      seen_ids.push_back(e);
      added = true;
    }
  }
  if (added) std::sort(seen_ids.begin(), seen_ids.end());
}

void update_entity_states(StateTable& table, const ElmanCell& cell, std::span<const int> ids,
                          const ad::Var& summaries) {
  if (summaries.cols() != static_cast<ad::Index>(ids.size()))
    throw ContractViolation("update_entity_states: one summary per incident entity required");
  table.set(ids, cell.step(summaries, table.gather(ids)));
}

RelationContext relation_context(std::span<const Quadruple> events,
                                 std::span<const int> entities) {
  auto local = [&](int e) {
    auto it = std::lower_bound(entities.begin(), entities.end(), e);
    if (it == entities.end() || *it != e)
      throw ContractViolation("relation_context: entity " + std::to_string(e) +
                              " is not incident to the snapshot");
    return static_cast<ad::Index>(it - entities.begin());
  };
  std::map<int, std::vector<ad::Index>> members;
  for (const auto& q : events) {
    auto& m = members[q.relation];
    m.push_back(local(q.subject));
    m.push_back(local(q.object));
  }
  RelationContext ctx;
  ctx.averaging = ad::Matrix::Zero(static_cast<ad::Index>(entities.size()),
                                   static_cast<ad::Index>(members.size()));
  ad::Index c = 0;
  for (auto& [rel, cols] : members) {
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    for (auto k : cols) ctx.averaging(k, c) = 1.0 / static_cast<double>(cols.size());
    ctx.relations.push_back(rel);
    ++c;
  }
  return ctx;
}

void update_relation_states(StateTable& table, const ElmanCell& cell,
                            const RelationContext& context, const ad::Var& entity_summaries) {
  if (context.relations.empty()) return;
  ad::Var inputs = ad::matmul(entity_summaries, ad::Var::constant(context.averaging));
  table.set(context.relations, cell.step(inputs, table.gather(context.relations)));
}

ad::Var graph_summary(const StateTable& dynamic_structural, const ad::Var& static_structural,
                      std::span<const int> seen_ids) {
  const auto dim = dynamic_structural.dim() + static_structural.rows();
  if (seen_ids.empty()) return ad::Var::constant(ad::Matrix::Zero(dim, 1));
  const ad::Var parts[] = {dynamic_structural.gather(seen_ids),
                           ad::gather_cols(static_structural, seen_ids)};
  return ad::rowwise_max(ad::vcat(parts));
}

}  // namespace evokg
