#include <gtest/gtest.h>

#include <random>

#include "evokg/errors.hpp"
#include "evokg/evaluator.hpp"
#include "evokg/synthetic.hpp"
#include "evokg/trainer.hpp"
#include "test_util.hpp"

namespace evokg {
namespace {

using ad::Matrix;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Sort descending; the truth's rank is the mean of the positions it shares
// with equal scores, rounded down, which is what the tie formula encodes.
int brute_force_rank(const Eigen::VectorXd& s, Eigen::Index truth) {
  std::vector<double> sorted(s.data(), s.data() + s.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  int first = 0, last = 0;
  for (int i = 0; i < static_cast<int>(sorted.size()); ++i) {
    if (sorted[static_cast<std::size_t>(i)] == s[truth]) {
      if (last == 0) first = i + 1;
      last = i + 1;
    }
  }
  return (first + last) / 2;
}

TEST(Rank, Examples) {
  EXPECT_EQ(rank_of_truth(vec({0.9, 0.5, 0.7}), 1), 3);
  EXPECT_EQ(rank_of_truth(vec({2, 2, 2, 2, 2}), 3), 3);
  EXPECT_EQ(rank_of_truth(vec({3, 3, 1}), 0), 1);
  EXPECT_EQ(rank_of_truth(vec({0.1, 5.0, 0.2}), 1), 1);
  EXPECT_THROW(rank_of_truth(vec({1, NAN}), 0), NumericalError);
  EXPECT_THROW(rank_of_truth(vec({1, 2}), 2), std::out_of_range);
}

TEST(Rank, MatchesBruteForceSort) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> size(1, 30), level(0, 6);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd s(size(rng));
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = level(rng) * 0.25;
    const auto truth = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(s.size()));
    const int r = rank_of_truth(s, truth);
    ASSERT_EQ(r, brute_force_rank(s, truth));
    ASSERT_GE(r, 1);
    ASSERT_LE(r, s.size());
  }
}

TEST(Rank, Summaries) {
  const std::vector<int> a{1, 2, 4};
  EXPECT_NEAR(summarize_ranks(a).mrr, 0.58333333333, 1e-9);
  const std::vector<int> b{1, 2, 4, 5};
  EXPECT_DOUBLE_EQ(summarize_ranks(b).hits3, 0.5);
  EXPECT_DOUBLE_EQ(summarize_ranks(b).hits10, 1.0);
  EXPECT_EQ(summarize_ranks({}).mrr, 0.0);
}

ModelConfig time_config() {
  ModelConfig c;
  c.task = Task::kTime;
  c.temporal_dim = c.structural_dim = 4;
  c.layers = 1;
  c.blocks = 1;
  c.components = 2;
  c.dropout = 0.0;
  c.sigma_floor = 1e-9;
  return c;
}

// Both heads emit one fixed component: mean log 2, stddev 1e-8.
void pin_time_heads(Model& m) {
  for (auto* h : {&m.params().time.pair, &m.params().time.min}) {
    for (auto* p : {&h->weight, &h->mean, &h->log_stddev}) p->out_weight.mutable_value().setZero();
    h->weight.out_bias.mutable_value() = (Matrix(2, 1) << 0.0, -1e9).finished();
    h->mean.out_bias.mutable_value().setConstant(std::log(2.0));
    h->log_stddev.out_bias.mutable_value().setConstant(std::log(1e-8));
  }
}

TEST(EvaluateTimes, PointMassPredictsReferencePlusTwo) {
  Model m(time_config(), 4, 1);
  pin_time_heads(m);
  const auto history = TemporalKG::build({{0, 0, 1, 10}}, 4, 1, Granularity::hours(24));
  const auto test = history.slice({{0, 0, 1, 13}, {2, 0, 3, 13}});
  const auto r = evaluate_times(m, history, test);
  EXPECT_EQ(r.time_queries, 1u);
  EXPECT_EQ(r.time_skipped, 1u);
  ASSERT_TRUE(r.mae_ticks);
  EXPECT_NEAR(*r.mae_ticks, 1.0, 1e-6);  // predicted 12, truth 13
  EXPECT_NEAR(*r.mae_hours, 24.0, 1e-4);
  // Same through the pair branch.
  m.params().time.alpha = 1.0;
  EXPECT_NEAR(*evaluate_times(m, history, test).mae_ticks, 1.0, 1e-6);
}

TEST(EvaluateTimes, NoHistoryMeansAbsentMae) {
  Model m(time_config(), 6, 1);
  const auto test = TemporalKG::build({{0, 0, 1, 3}, {2, 0, 3, 3}}, 6, 1);
  const auto r = evaluate_times(m, TemporalKG::build({}, 6, 1), test);
  EXPECT_EQ(r.time_skipped, 2u);
  EXPECT_FALSE(r.mae_hours);
}

TEST(Baseline, Examples) {
  // Constant gap of two ticks.
  const auto g = TemporalKG::build({{0, 0, 1, 0}, {0, 0, 1, 2}, {0, 0, 1, 4}, {0, 0, 1, 6}, {0, 0, 1, 8}}, 2, 1);
  const auto s = chronological_split(g, 6, 6);
  for (double alpha : {0.0, 1.0}) EXPECT_DOUBLE_EQ(*naive_time_baseline(s.train, s.test, alpha).mae_ticks, 0.0);

  // Gaps {1, 3} in history, test gap 1.
  const auto h = TemporalKG::build({{0, 0, 1, 0}, {2, 0, 3, 0}, {0, 0, 1, 1}, {2, 0, 3, 3}}, 4, 1);
  const auto t = h.slice({{2, 0, 3, 4}});
  const auto r = naive_time_baseline(h, t, 1.0);
  EXPECT_DOUBLE_EQ(*r.mae_ticks, 1.0);
  EXPECT_TRUE(std::isfinite(*r.mae_hours));

  // Period-3 synthetic graph, frozen value.
  const auto p = period3_split();
  EXPECT_NEAR(*naive_time_baseline(concat(p.train, p.valid), p.test, 0.0).mae_ticks, 0.983696, 1e-6);
}

TEST(Evaluate, ChronologyEnforced) {
  Model m(time_config(), 4, 1);
  const auto h = TemporalKG::build({{0, 0, 1, 5}}, 4, 1);
  const auto t = h.slice({{0, 0, 1, 5}});
  EXPECT_THROW(evaluate_links(m, h, t, true), ValidationError);
  EXPECT_THROW(evaluate_times(m, h, t), ValidationError);
  EXPECT_THROW(naive_time_baseline(h, t, 0.0), ValidationError);
}

ModelConfig link_config() {
  ModelConfig c;
  c.temporal_dim = c.structural_dim = 8;
  c.layers = 1;
  c.blocks = 2;
  c.components = 4;
  c.dropout = 0.0;
  c.seed = 4;
  return c;
}

TEST(EvaluateLinks, ScoresBeforeObserving) {
  const auto split = period3_split();
  Model m(link_config(), 10, 2);
  const auto r = evaluate_links(m, concat(split.train, split.valid), split.test, true);
  ASSERT_EQ(r.ranks.size(), split.test.size());

  // Manual replay of the online protocol.
  auto state = m.initial_state();
  propagate(m, state, concat(split.train, split.valid));
  std::size_t k = 0;
  for (const auto& snap : split.test.snapshots()) {
    for (const auto& q : snap.events) {
      const auto scores = m.score_objects(state, q.subject, q.relation, q.tick, true);
      EXPECT_EQ(r.ranks[k].rank, rank_of_truth(scores, q.object));
      EXPECT_EQ(r.ranks[k].query, q);
      ++k;
    }
    m.advance(state, snap);
  }
}

TEST(EvaluateLinks, PrefixOfTestSetGivesSameEarlyResults) {
  const auto split = period3_split();
  Model m(link_config(), 10, 2);
  const auto history = concat(split.train, split.valid);
  const auto full = evaluate_links(m, history, split.test, true);
  std::vector<Quadruple> prefix;
  for (const auto& q : split.test.quadruples())
    if (q.tick < 55) prefix.push_back(q);
  const auto part = evaluate_links(m, history, split.test.slice(prefix), true);
  ASSERT_EQ(part.per_tick.size(), 5u);
  for (std::size_t i = 0; i < part.ranks.size(); ++i) EXPECT_EQ(part.ranks[i].rank, full.ranks[i].rank);
  for (std::size_t i = 0; i < part.per_tick.size(); ++i)
    EXPECT_EQ(part.per_tick[i].mrr, full.per_tick[i].mrr);

  const auto times_full = evaluate_times(m, history, split.test);
  const auto times_part = evaluate_times(m, history, split.test.slice(prefix));
  for (std::size_t i = 0; i < times_part.per_tick.size(); ++i)
    EXPECT_EQ(times_part.per_tick[i].mae_hours, times_full.per_tick[i].mae_hours);
}

TEST(EvaluateLinks, MetricsAreBounded) {
  const auto split = period3_split();
  Model m(link_config(), 10, 2);
  const auto r = evaluate_links(m, split.train, split.valid, false);
  ASSERT_TRUE(r.mrr);
  EXPECT_GT(*r.mrr, 0.0);
  EXPECT_LE(*r.mrr, 1.0);
  EXPECT_LE(*r.hits3, *r.hits10);
  for (const auto& rr : r.ranks) EXPECT_LE(rr.rank, 10);
}

TEST(TimeNll, MatchesSummedTickLosses) {
  const auto split = period3_split();
  Model m(link_config(), 10, 2);
  const double v = time_nll(m, split.train, split.valid);
  EXPECT_TRUE(std::isfinite(v));
  auto state = m.initial_state();
  propagate(m, state, split.train);
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& snap : split.valid.snapshots()) {
    const auto tl = m.tick_loss(state, snap, {1.0, 0.0});
    total += tl.time_nll;
    n += tl.time_events;
    m.advance(state, snap);
  }
  EXPECT_NEAR(v, total / static_cast<double>(n), 1e-12);
}

TEST(Report, TextAndCsvRoundTrip) {
  MetricReport r;
  r.link_queries = 3;
  r.mrr = 0.5833333333333334;
  r.hits3 = 2.0 / 3.0;
  r.hits10 = 1.0;
  r.time_skipped = 2;
  TickMetrics t;
  t.tick = 7;
  t.link_queries = 3;
  t.mrr = 0.25;
  r.per_tick.push_back(t);
  const auto text = to_report_text(r);
  EXPECT_NE(text.find("mae_hours: absent"), std::string::npos);
  EXPECT_NE(text.find("ranking: raw, object"), std::string::npos);

  const auto dir = testing::fresh_dir("report_csv");
  write_report_csv(dir / "m.csv", r);
  const auto rows = read_report_csv(dir / "m.csv");
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows[0].metric, "mrr");
  EXPECT_EQ(rows[0].value, *r.mrr);  // exact round trip
  EXPECT_EQ(rows[0].tick_bucket, "all");
  EXPECT_EQ(rows[0].split, "test");
  const auto per_tick = std::find_if(rows.begin(), rows.end(), [](auto& x) { return x.tick_bucket == "7"; });
  ASSERT_NE(per_tick, rows.end());
  EXPECT_EQ(per_tick->value, 0.25);
}

}  // namespace
}  // namespace evokg
