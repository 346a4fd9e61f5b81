#pragma once

// Online evaluation: score queries at tick t from states built on history
// before t, then fold the observed snapshot into the states.

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evokg/model.hpp"
#include "evokg/tkg_store.hpp"

namespace evokg {

struct RankResult {
  Quadruple query;
  int rank = 0;
  double truth_score = 0.0;
};

struct TickMetrics {
  Tick tick = 0;
  std::size_t link_queries = 0;
  double mrr = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t time_queries = 0;  // non-skipped
  std::size_t time_skipped = 0;
  std::optional<double> mae_hours;
};

struct MetricReport {
  std::string split = "test";
  std::size_t link_queries = 0;
  std::optional<double> mrr;
  std::optional<double> hits3;
  std::optional<double> hits10;
  std::size_t time_queries = 0;
  std::size_t time_skipped = 0;
  std::optional<double> mae_hours;
  std::optional<double> mae_ticks;
  std::vector<TickMetrics> per_tick;
  std::vector<RankResult> ranks;
};

// 1 + #{greater} + floor(#{other ties} / 2). Throws on non-finite scores.
int rank_of_truth(const Eigen::VectorXd& scores, Eigen::Index truth);

struct RankSummary {
  double mrr = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
};
RankSummary summarize_ranks(std::span<const int> ranks);

// Folds every snapshot of `g` into `state` without gradients.
void propagate(const Model& model, RecurrentState& state, const TemporalKG& g);

// Throws ValidationError if history reaches into test's first tick.
void check_chronology(const TemporalKG& history, const TemporalKG& test);

MetricReport evaluate_links(const Model& model, const TemporalKG& history, const TemporalKG& test,
                            bool use_time_score);
MetricReport evaluate_times(const Model& model, const TemporalKG& history,
                            const TemporalKG& test);

// Predicts reference + mean historical tau for each branch.
MetricReport naive_time_baseline(const TemporalKG& history, const TemporalKG& test, double alpha);

// Mean per-event time NLL on `test` (events without history excluded).
double time_nll(const Model& model, const TemporalKG& history, const TemporalKG& test);

// `key: value` lines.
std::string to_report_text(const MetricReport& report);
void write_report_text(const std::filesystem::path& path, const MetricReport& report);
// metric,value,split,tick_bucket
std::string to_report_csv(const MetricReport& report);
void write_report_csv(const std::filesystem::path& path, const MetricReport& report);

struct CsvMetric {
  std::string metric;
  double value = 0.0;
  std::string split;
  std::string tick_bucket;
};
std::vector<CsvMetric> read_report_csv(const std::filesystem::path& path);

}  // namespace evokg
