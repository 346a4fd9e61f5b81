#include <gtest/gtest.h>

#include <random>

#include "evokg/errors.hpp"
#include "evokg/recurrent_state.hpp"
#include "test_util.hpp"

namespace evokg {
namespace {

using ad::Matrix;
using ad::Var;
using testing::random_matrix;

TEST(State, ZeroInitialised) {
  RecurrentState s(3, 4, 5, 2);
  EXPECT_TRUE(s.entity_temporal.values().isZero(0));
  EXPECT_TRUE(s.entity_structural.values().isZero(0));
  EXPECT_TRUE(s.relation_temporal.values().isZero(0));
  EXPECT_TRUE(s.relation_structural.values().isZero(0));
  EXPECT_EQ(s.entity_structural.dim(), 4);
  EXPECT_TRUE(s.seen_ids.empty());
}

TEST(Elman, ZeroInZeroOut) {
  std::mt19937_64 rng(1);
  auto cell = ElmanCell::glorot(3, 4, rng);
  EXPECT_TRUE(cell.bias.value().isZero(0));
  StateTable t(4, 2);
  const std::vector<int> ids{1};
  update_entity_states(t, cell, ids, Var::constant(Matrix::Zero(3, 1)));
  EXPECT_TRUE(t.values().isZero(0));
}

TEST(Elman, TwoStepUnrollAndLocality) {
  std::mt19937_64 rng(2);
  auto cell = ElmanCell::glorot(3, 4, rng);
  cell.bias.mutable_value() = random_matrix(4, 1, rng);
  StateTable t(4, 3);
  t.restore(random_matrix(4, 3, rng));
  const Matrix before = t.values();
  const Matrix x1 = random_matrix(3, 1, rng), x2 = random_matrix(3, 1, rng);
  const std::vector<int> ids{2};
  update_entity_states(t, cell, ids, Var::constant(x1));
  update_entity_states(t, cell, ids, Var::constant(x2));
  const auto& wi = cell.input_weight.value();
  const auto& wh = cell.hidden_weight.value();
  const auto& b = cell.bias.value();
  const Matrix h1 = (wi * x1 + wh * before.col(2) + b).array().tanh().matrix();
  const Matrix h2 = (wi * x2 + wh * h1 + b).array().tanh().matrix();
  EXPECT_TRUE(t.values().col(2).isApprox(h2, 1e-14));
  EXPECT_EQ(t.values().leftCols(2), before.leftCols(2));  // bit-identical
}

TEST(Elman, SummaryCountMismatchIsContractViolation) {
  std::mt19937_64 rng(3);
  auto cell = ElmanCell::glorot(2, 2, rng);
  StateTable t(2, 3);
  const std::vector<int> ids{0, 1};
  EXPECT_THROW(update_entity_states(t, cell, ids, Var::constant(Matrix::Zero(2, 1))),
               ContractViolation);
}

TEST(StateTable, LineageUntilTruncate) {
  StateTable t(2, 2);
  Var w = Var::parameter(Matrix::Ones(2, 1));
  const std::vector<int> ids{0};
  t.set(ids, ad::scale(w, 3.0));
  EXPECT_TRUE(t.has_lineage());
  ad::backward(ad::sum(t.gather(ids)));
  EXPECT_DOUBLE_EQ(w.grad()(0, 0), 3.0);
  t.truncate();
  EXPECT_FALSE(t.has_lineage());
  EXPECT_FALSE(t.gather(ids).requires_grad());
  EXPECT_DOUBLE_EQ(t.values()(1, 0), 3.0);
}

TEST(RelationContext, MeanOfDeduplicatedEndpoints) {
  // r0: (0,1) and (0,2) share entity 0; r1 single edge (3,4); r2 absent.
  const std::vector<Quadruple> events{{0, 0, 1, 0}, {0, 0, 2, 0}, {3, 1, 4, 0}};
  const std::vector<int> entities{0, 1, 2, 3, 4};
  const auto ctx = relation_context(events, entities);
  ASSERT_EQ(ctx.relations, (std::vector<int>{0, 1}));
  std::mt19937_64 rng(4);
  const Matrix summaries = random_matrix(3, 5, rng);
  const Matrix c = summaries * ctx.averaging;
  // Explicit set construction.
  EXPECT_TRUE(c.col(0).isApprox((summaries.col(0) + summaries.col(1) + summaries.col(2)) / 3.0, 1e-14));
  EXPECT_TRUE(c.col(1).isApprox((summaries.col(3) + summaries.col(4)) / 2.0, 1e-14));

  auto cell = ElmanCell::glorot(3, 3, rng);
  StateTable rel(3, 3);
  rel.restore(random_matrix(3, 3, rng));
  const Matrix before = rel.values();
  update_relation_states(rel, cell, ctx, Var::constant(summaries));
  EXPECT_EQ(rel.values().col(2), before.col(2));
  const Matrix expect = (cell.input_weight.value() * c.col(1) +
                         cell.hidden_weight.value() * before.col(1)).array().tanh().matrix();
  EXPECT_TRUE(rel.values().col(1).isApprox(expect, 1e-14));
}

TEST(RelationContext, NonIncidentEntityThrows) {
  const std::vector<Quadruple> events{{0, 0, 9, 0}};
  const std::vector<int> entities{0};
  EXPECT_THROW(relation_context(events, entities), ContractViolation);
}

TEST(GraphSummary, Examples) {
  StateTable dyn(1, 3);
  dyn.restore((Matrix(1, 3) << 1, 0, -5).finished());
  const Var stat = Var::constant((Matrix(1, 3) << 0, 1, -5).finished());
  const std::vector<int> one{0}, two{0, 1}, none{};
  EXPECT_EQ(graph_summary(dyn, stat, one).value(), (Matrix(2, 1) << 1, 0).finished());
  EXPECT_EQ(graph_summary(dyn, stat, two).value(), (Matrix(2, 1) << 1, 1).finished());
  EXPECT_TRUE(graph_summary(dyn, stat, none).value().isZero(0));
  EXPECT_EQ(graph_summary(dyn, stat, none).rows(), 2);
}

TEST(GraphSummary, PermutationInvariantAndMonotone) {
  std::mt19937_64 rng(5);
  StateTable dyn(4, 12);
  dyn.restore(random_matrix(4, 12, rng));
  const Var stat = Var::constant(random_matrix(3, 12, rng));
  std::vector<int> ids{0, 3, 5, 7, 11};
  const Matrix g = graph_summary(dyn, stat, ids).value();
  std::shuffle(ids.begin(), ids.end(), rng);
  EXPECT_EQ(graph_summary(dyn, stat, ids).value(), g);
  ids.push_back(2);
  const Matrix bigger = graph_summary(dyn, stat, ids).value();
  EXPECT_TRUE((bigger.array() >= g.array()).all());
}

TEST(State, MarkSeenKeepsSortedUniqueIds) {
  RecurrentState s(2, 2, 6, 1);
  const std::vector<int> a{4, 1}, b{1, 2};
  s.mark_seen(a);
  s.mark_seen(b);
  EXPECT_EQ(s.seen_ids, (std::vector<int>{1, 2, 4}));
}

}  // namespace
}  // namespace evokg
