#include <gtest/gtest.h>

#include <random>

#include "evokg/structure_head.hpp"
#include "test_util.hpp"

namespace evokg {
namespace {

using ad::Matrix;
using ad::Var;
using testing::random_matrix;

struct Instance {
  int E, R, d;
  StructureHeadParams params;
  Matrix entity_repr, relation_repr, summary;
};

Instance make_instance(int E, int R, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Instance in{E, R, d, StructureHeadParams::glorot(d, E, R, rng), random_matrix(d, E, rng),
              random_matrix(d, R, rng), random_matrix(d, 1, rng)};
  return in;
}

TripleInputs inputs_for(const Instance& in, std::span<const Quadruple> events) {
  const auto n = static_cast<ad::Index>(events.size());
  Matrix s(in.d, n), r(in.d, n);
  for (ad::Index i = 0; i < n; ++i) {
    s.col(i) = in.entity_repr.col(events[static_cast<std::size_t>(i)].subject);
    r.col(i) = in.relation_repr.col(events[static_cast<std::size_t>(i)].relation);
  }
  return {Var::constant(s), Var::constant(r), Var::constant(in.summary.replicate(1, n))};
}

double enumerate_total(const Instance& in) {
  std::vector<Quadruple> all;
  for (int s = 0; s < in.E; ++s)
    for (int r = 0; r < in.R; ++r)
      for (int o = 0; o < in.E; ++o) all.push_back({s, r, o, 0});
  const auto lp = triple_logprob(inputs_for(in, all), all, in.params);
  const Matrix joint = lp.object.value() + lp.relation.value() + lp.subject.value();
  return joint.array().exp().sum();
}

TEST(StructureHead, JointSumsToOne) {
  EXPECT_NEAR(enumerate_total(make_instance(5, 3, 4, 1)), 1.0, 1e-6);
  EXPECT_NEAR(enumerate_total(make_instance(3, 2, 6, 2)), 1.0, 1e-6);
}

TEST(StructureHead, SingletonSetsGiveZeroLoss) {
  auto in = make_instance(1, 1, 3, 3);
  const std::vector<Quadruple> ev{{0, 0, 0, 0}};
  const auto lp = triple_logprob(inputs_for(in, ev), ev, in.params);
  EXPECT_EQ(lp.object.scalar(), 0.0);
  EXPECT_EQ(lp.relation.scalar(), 0.0);
  EXPECT_EQ(lp.subject.scalar(), 0.0);
  EXPECT_EQ(nll_triple(inputs_for(in, ev), ev, in.params).scalar(), 0.0);
}

TEST(StructureHead, UniformLogitsGiveLogCounts) {
  auto in = make_instance(4, 3, 2, 4);
  for (auto* p : {&in.params.object, &in.params.relation, &in.params.subject}) {
    p->out_weight.mutable_value().setZero();
    p->out_bias.mutable_value().setZero();
  }
  const std::vector<Quadruple> ev{{1, 2, 3, 0}};
  EXPECT_NEAR(nll_triple(inputs_for(in, ev), ev, in.params).scalar(),
              2 * std::log(4.0) + std::log(3.0), 1e-12);
}

TEST(StructureHead, TermsAreLogProbabilities) {
  auto in = make_instance(6, 2, 3, 5);
  const std::vector<Quadruple> ev{{0, 1, 5, 0}, {3, 0, 3, 0}};
  const auto lp = triple_logprob(inputs_for(in, ev), ev, in.params);
  for (const auto* v : {&lp.object, &lp.relation, &lp.subject})
    EXPECT_TRUE((v->value().array() <= 0.0).all());
  const std::vector<Quadruple> bad{{0, 2, 1, 0}};
  EXPECT_THROW(triple_logprob(inputs_for(in, ev), bad, in.params), std::invalid_argument);
  const std::vector<Quadruple> bad_one{{0, 0, 9, 0}};
  const std::vector<Quadruple> ok_one{{0, 0, 1, 0}};
  EXPECT_THROW(triple_logprob(inputs_for(in, ok_one), bad_one, in.params), std::out_of_range);
}

TEST(StructureHead, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  auto in = make_instance(3, 2, 3, 7);
  const std::vector<Quadruple> ev{{0, 1, 2, 0}, {2, 0, 2, 0}, {1, 1, 0, 0}};
  Var s = Var::parameter(random_matrix(3, 3, rng));
  Var r = Var::parameter(random_matrix(3, 3, rng));
  Var g = Var::parameter(random_matrix(3, 3, rng));
  auto loss = [&] { return nll_triple({s, r, g}, ev, in.params); };
  for (auto v : {s, r, g}) EXPECT_LT(testing::check_gradient(loss, v, 1e-5).relative_error, 1e-6);
  for (const auto* p : {&in.params.object, &in.params.relation, &in.params.subject})
    for (auto v : {p->hidden_weight, p->hidden_bias, p->out_weight, p->out_bias})
      EXPECT_LT(testing::check_gradient(loss, v, 1e-5).relative_error, 1e-6);
}

TEST(ScoreObjects, StructureOnlyPreservesLogitOrder) {
  auto in = make_instance(7, 2, 3, 8);
  Eigen::VectorXd x(9);
  x << in.entity_repr.col(2), in.relation_repr.col(1), in.summary;
  const Eigen::VectorXd logits = in.params.object.eval(x).col(0);
  const Eigen::VectorXd lp = object_log_probs(in.entity_repr.col(2), in.relation_repr.col(1),
                                              in.summary.col(0), in.params);
  const Eigen::VectorXd scores = score_objects(lp, nullptr);
  EXPECT_NEAR(scores.array().exp().sum(), 1.0, 1e-12);
  const Eigen::VectorXd shift = scores - logits;
  EXPECT_LT(shift.maxCoeff() - shift.minCoeff(), 1e-12);
}

TEST(ScoreObjects, TwoEntityLogits) {
  const Eigen::VectorXd lp = log_softmax((Matrix(2, 1) << 1.0, 0.0).finished()).col(0);
  const auto s = score_objects(lp, nullptr);
  EXPECT_GT(s[0], s[1]);
}

TEST(ScoreObjects, JointMatchesPerCandidateBruteForce) {
  std::mt19937_64 rng(9);
  auto in = make_instance(4, 1, 2, 10);
  TimeHeadParams head;
  head.pair = MixtureHead::glorot(6, 6, 3, rng);
  head.min = MixtureHead::glorot(6, 6, 3, rng);
  head.alpha = 0.6;
  CandidateTimeTerm term;
  term.contexts = random_matrix(6, 4, rng);
  term.taus = {{2, 1}, {std::nullopt, 3}, {5, std::nullopt}, {4, 2}};
  term.head = &head;
  const Eigen::VectorXd lp = object_log_probs(in.entity_repr.col(0), in.relation_repr.col(0),
                                              in.summary.col(0), in.params);
  const auto s = score_objects(lp, &term);
  for (int o = 0; o < 4; ++o) {
    const auto& tau = term.taus[static_cast<std::size_t>(o)];
    const auto w = branch_weights(tau, head.alpha);
    double p = 0.0;
    if (w.pair > 0)
      p += w.pair * density(static_cast<double>(*tau.pair),
                            mixture_params(term.contexts.col(o), head, TimeBranch::kPair));
    if (w.min > 0)
      p += w.min * density(static_cast<double>(*tau.min),
                           mixture_params(term.contexts.col(o), head, TimeBranch::kMin));
    EXPECT_NEAR(s[o], std::log(p * std::exp(lp[o])), 1e-10);
  }
}

}  // namespace
}  // namespace evokg
