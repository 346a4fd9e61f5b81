#include "evokg/evaluator.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "evokg/errors.hpp"

namespace evokg {

int rank_of_truth(const Eigen::VectorXd& scores, Eigen::Index truth) {
  if (truth < 0 || truth >= scores.size()) throw std::out_of_range("rank_of_truth: bad index");
  if (!scores.allFinite()) throw NumericalError("rank_of_truth: non-finite score");
  const double t = scores[truth];
  int greater = 0, ties = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (i == truth) continue;
    if (scores[i] > t)
      ++greater;
    else if (scores[i] == t)
      ++ties;
  }
  return 1 + greater + ties / 2;
}

RankSummary summarize_ranks(std::span<const int> ranks) {
  RankSummary s;
  if (ranks.empty()) return s;
  for (int r : ranks) {
    s.mrr += 1.0 / r;
    s.hits3 += r <= 3 ? 1.0 : 0.0;
    s.hits10 += r <= 10 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(ranks.size());
  s.mrr /= n;
  s.hits3 /= n;
  s.hits10 /= n;
  return s;
}

void propagate(const Model& model, RecurrentState& state, const TemporalKG& g) {
  for (const auto& snap : g.snapshots()) {
    model.advance(state, snap);
    state.truncate();
  }
}

void check_chronology(const TemporalKG& history, const TemporalKG& test) {
  const auto h = history.last_tick();
  const auto t = test.first_tick();
  if (h && t && *h >= *t)
    throw ValidationError("history ends at tick " + std::to_string(*h) +
                          " but evaluation starts at tick " + std::to_string(*t));
}

namespace {

// Predicted tick of q; nullopt when neither branch has history.
std::optional<double> predict_tick(const Quadruple& q, const HistoryTracker& tracker,
                                   double alpha, double expected_pair, double expected_min) {
  const auto taus = tracker.inter_event_times(q);
  const auto w = branch_weights(taus, alpha);
  if (w.skip()) return std::nullopt;
  double t = 0.0;
  if (w.pair > 0.0) {
    const auto ref = *tracker.last_pair_time(q.subject, q.object);
    t += w.pair * (static_cast<double>(ref) + expected_pair);
  }
  if (w.min > 0.0) {
    const auto ls = tracker.last_entity_time(q.subject);
    const auto lo = tracker.last_entity_time(q.object);
    const auto ref = std::max(ls.value_or(*lo), lo.value_or(*ls));
    t += w.min * (static_cast<double>(ref) + expected_min);
  }
  return t;
}

void finish_time_metrics(MetricReport& r, double abs_err_ticks_sum, double hours_per_tick) {
  if (r.time_queries == 0) return;
  r.mae_ticks = abs_err_ticks_sum / static_cast<double>(r.time_queries);
  r.mae_hours = *r.mae_ticks * hours_per_tick;
}

}  // namespace

MetricReport evaluate_links(const Model& model, const TemporalKG& history, const TemporalKG& test,
                            bool use_time_score) {
  check_chronology(history, test);
  auto state = model.initial_state();
  propagate(model, state, history);
  MetricReport report;
  std::vector<int> all;
  for (const auto& snap : test.snapshots()) {
    std::vector<int> ranks;
    for (const auto& q : snap.events) {
      const auto scores = model.score_objects(state, q.subject, q.relation, q.tick, use_time_score);
      const int rank = rank_of_truth(scores, q.object);
      ranks.push_back(rank);
      report.ranks.push_back({q, rank, scores[q.object]});
    }
    const auto s = summarize_ranks(ranks);
    TickMetrics tm;
    tm.tick = snap.tick;
    tm.link_queries = ranks.size();
    tm.mrr = s.mrr;
    tm.hits3 = s.hits3;
    tm.hits10 = s.hits10;
    report.per_tick.push_back(tm);
    all.insert(all.end(), ranks.begin(), ranks.end());
    model.advance(state, snap);
    state.truncate();
  }
  report.link_queries = all.size();
  if (!all.empty()) {
    const auto s = summarize_ranks(all);
    report.mrr = s.mrr;
    report.hits3 = s.hits3;
    report.hits10 = s.hits10;
  }
  return report;
}

MetricReport evaluate_times(const Model& model, const TemporalKG& history,
                            const TemporalKG& test) {
  check_chronology(history, test);
  auto state = model.initial_state();
  propagate(model, state, history);
  const double hours = test.granularity().hours_per_tick;
  const auto& head = model.params().time;
  MetricReport report;
  double err_sum = 0.0;
  for (const auto& snap : test.snapshots()) {
    TickMetrics tm;
    tm.tick = snap.tick;
    double tick_err = 0.0;
    for (const auto& q : snap.events) {
      const auto w = branch_weights(state.tracker.inter_event_times(q), head.alpha);
      double ep = 0.0, em = 0.0;
      if (!w.skip()) {
        const ad::Matrix ctx = model.time_context(state, q.subject, q.relation, q.object);
        if (w.pair > 0.0) ep = branch_expectations(ctx, head, TimeBranch::kPair)(0, 0);
        if (w.min > 0.0) em = branch_expectations(ctx, head, TimeBranch::kMin)(0, 0);
      }
      const auto pred = predict_tick(q, state.tracker, head.alpha, ep, em);
      if (!pred) {
        ++tm.time_skipped;
        continue;
      }
      const double e = std::abs(*pred - static_cast<double>(q.tick));
      tick_err += e;
      ++tm.time_queries;
    }
    if (tm.time_queries > 0) tm.mae_hours = tick_err / static_cast<double>(tm.time_queries) * hours;
    report.time_queries += tm.time_queries;
    report.time_skipped += tm.time_skipped;
    err_sum += tick_err;
    report.per_tick.push_back(tm);
    model.advance(state, snap);
    state.truncate();
  }
  finish_time_metrics(report, err_sum, hours);
  return report;
}

MetricReport naive_time_baseline(const TemporalKG& history, const TemporalKG& test,
                                 double alpha) {
  check_chronology(history, test);
  HistoryTracker tracker;
  double pair_sum = 0.0, min_sum = 0.0;
  std::size_t pair_n = 0, min_n = 0;
  for (const auto& snap : history.snapshots()) {
    for (const auto& q : snap.events) {
      const auto taus = tracker.inter_event_times(q);
      if (taus.pair) {
        pair_sum += static_cast<double>(*taus.pair);
        ++pair_n;
      }
      if (taus.min) {
        min_sum += static_cast<double>(*taus.min);
        ++min_n;
      }
    }
    tracker.observe(snap);
  }
  double mean_pair = pair_n ? pair_sum / static_cast<double>(pair_n) : 0.0;
  double mean_min = min_n ? min_sum / static_cast<double>(min_n) : 0.0;
  if (!pair_n) mean_pair = mean_min;
  if (!min_n) mean_min = mean_pair;
  const bool any = pair_n || min_n;

  const double hours = test.granularity().hours_per_tick;
  MetricReport report;
  double err_sum = 0.0;
  for (const auto& snap : test.snapshots()) {
    TickMetrics tm;
    tm.tick = snap.tick;
    double tick_err = 0.0;
    for (const auto& q : snap.events) {
      const auto pred = any ? predict_tick(q, tracker, alpha, mean_pair, mean_min) : std::nullopt;
      if (!pred) {
        ++tm.time_skipped;
        continue;
      }
      tick_err += std::abs(*pred - static_cast<double>(q.tick));
      ++tm.time_queries;
    }
    if (tm.time_queries > 0) tm.mae_hours = tick_err / static_cast<double>(tm.time_queries) * hours;
    report.time_queries += tm.time_queries;
    report.time_skipped += tm.time_skipped;
    err_sum += tick_err;
    report.per_tick.push_back(tm);
    tracker.observe(snap);
  }
  finish_time_metrics(report, err_sum, hours);
  return report;
}

double time_nll(const Model& model, const TemporalKG& history, const TemporalKG& test) {
  check_chronology(history, test);
  auto state = model.initial_state();
  propagate(model, state, history);
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& snap : test.snapshots()) {
    if (state.tracker.latest_tick()) {
      const auto tl = model.tick_loss(state, snap, {1.0, 0.0});
      total += tl.time_nll;
      n += tl.time_events;
    }
    model.advance(state, snap);
    state.truncate();
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void put(std::ostream& os, const std::string& key, const std::optional<double>& v) {
  os << key << ": " << (v ? fmt(*v) : std::string("absent")) << '\n';
}

}  // namespace

std::string to_report_text(const MetricReport& r) {
  std::ostringstream os;
  os << "split: " << r.split << '\n';
  os << "link_queries: " << r.link_queries << '\n';
  os << "ranking: raw, object\n";
  put(os, "mrr", r.mrr);
  put(os, "hits@3", r.hits3);
  put(os, "hits@10", r.hits10);
  os << "time_queries: " << r.time_queries << '\n';
  os << "time_skipped: " << r.time_skipped << '\n';
  put(os, "mae_hours", r.mae_hours);
  put(os, "mae_ticks", r.mae_ticks);
  return os.str();
}

std::string to_report_csv(const MetricReport& r) {
  std::ostringstream os;
  os << "metric,value,split,tick_bucket\n";
  auto row = [&](const char* m, double v, const std::string& bucket) {
    os << m << ',' << fmt(v) << ',' << r.split << ',' << bucket << '\n';
  };
  if (r.mrr) row("mrr", *r.mrr, "all");
  if (r.hits3) row("hits@3", *r.hits3, "all");
  if (r.hits10) row("hits@10", *r.hits10, "all");
  if (r.mae_hours) row("mae_hours", *r.mae_hours, "all");
  if (r.mae_ticks) row("mae_ticks", *r.mae_ticks, "all");
  row("time_skipped", static_cast<double>(r.time_skipped), "all");
  for (const auto& t : r.per_tick) {
    const auto bucket = std::to_string(t.tick);
    if (t.link_queries) {
      row("mrr", t.mrr, bucket);
      row("hits@3", t.hits3, bucket);
      row("hits@10", t.hits10, bucket);
    }
    if (t.mae_hours) row("mae_hours", *t.mae_hours, bucket);
  }
  return os.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_report_text(const std::filesystem::path& path, const MetricReport& report) {
  write_file(path, to_report_text(report));
}

void write_report_csv(const std::filesystem::path& path, const MetricReport& report) {
  write_file(path, to_report_csv(report));
}

std::vector<CsvMetric> read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<CsvMetric> out;
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    if (++n == 1 || line.empty()) continue;
    std::istringstream ls(line);
    CsvMetric m;
    std::string value;
    if (!std::getline(ls, m.metric, ',') || !std::getline(ls, value, ',') ||
        !std::getline(ls, m.split, ',') || !std::getline(ls, m.tick_bucket))
      throw ParseError(path.string() + ": malformed row", n);
    m.value = std::stod(value);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace evokg
