#pragma once

// Chronological training sweep with truncated backpropagation and
// early-stopped, optionally two-phase, loss weighting.

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "evokg/model.hpp"
#include "evokg/optimizer.hpp"
#include "evokg/tkg_store.hpp"

namespace evokg {

struct EpochLosses {
  double time_nll = 0.0;    // summed over events, unweighted
  double triple_nll = 0.0;  // summed over events, unweighted
  double total = 0.0;       // weighted
  std::size_t time_events = 0;
  std::size_t time_skipped = 0;
  std::size_t triple_events = 0;
  std::size_t optimizer_steps = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based across phases
  int phase = 1;
  LossWeights weights;
  EpochLosses losses;
  double valid_metric = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::string metric = "mrr";  // or "time_nll"
  bool higher_is_better = true;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0 when no epoch ran
  std::optional<double> best_metric;
};

std::vector<ad::Matrix> parameter_values(const Model& model);
void restore_parameter_values(Model& model, const std::vector<ad::Matrix>& values);

class Trainer {
 public:
  explicit Trainer(Model& model);

  // One pass over `train` from zero states.
  EpochLosses train_epoch(const TemporalKG& train, LossWeights weights);

  // Validation with state propagation over train then valid.
  double validation_metric(const TemporalKG& train, const TemporalKG& valid) const;

  // Leaves the best parameters in the model.
  TrainReport fit(const TemporalKG& train, const TemporalKG& valid,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

 private:
  void optimize(ad::Var& pending);

  Model& model_;
  AdamW optimizer_;
  std::mt19937_64 dropout_rng_;
};

// One JSON object per line.
std::string epoch_log_line(const EpochRecord& record, const std::string& metric);

}  // namespace evokg
