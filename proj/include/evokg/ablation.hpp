#pragma once

// One-factor-at-a-time sensitivity sweep. Each setting is reported as a
// ratio to the best setting on its axis (1.0 = best).

#include <functional>
#include <string>
#include <vector>

#include "evokg/config.hpp"
#include "evokg/tkg_store.hpp"

namespace evokg {

struct AblationAxis {
  std::string name;  // embedding_dim, layers, components, truncation
  std::vector<int> values;
};

// The sweep values, with embedding sizes multiplied by `embedding_scale`
// (rounded to a multiple of the block count).
std::vector<AblationAxis> default_ablation_axes(double embedding_scale, int blocks);

struct AblationCell {
  std::string axis;
  int value = 0;
  double mrr = 0.0;
  double mae_ticks = 0.0;
  double mrr_ratio = 0.0;  // mrr / best mrr on the axis
  double mae_ratio = 0.0;  // best mae / mae on the axis
  int link_epochs = 0;
  int time_epochs = 0;
};

void apply_axis_value(ModelConfig& cfg, const std::string& axis, int value);

// Trains a link model and a time model per setting on split.train with
// split.valid for early stopping, then evaluates on split.test.
std::vector<AblationCell> run_ablation(const ModelConfig& base, const Split& split,
                                       const std::vector<AblationAxis>& axes,
                                       const std::function<void(const AblationCell&)>& progress = {});

// Markdown-style table: axis | value | MRR | MRR ratio | MAE | MAE ratio.
std::string ablation_table(const std::vector<AblationCell>& cells);
std::string ablation_csv(const std::vector<AblationCell>& cells);

}  // namespace evokg
