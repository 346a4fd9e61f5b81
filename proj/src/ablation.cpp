#include "evokg/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "evokg/errors.hpp"
#include "evokg/evaluator.hpp"
#include "evokg/trainer.hpp"

namespace evokg {

std::vector<AblationAxis> default_ablation_axes(double embedding_scale, int blocks) {
  std::vector<int> dims;
  for (int d : {100, 200, 400}) {
    int s = static_cast<int>(std::lround(d * embedding_scale / blocks)) * blocks;
    dims.push_back(std::max(s, blocks));
  }
  return {{"embedding_dim", dims},
          {"layers", {1, 2, 3}},
          {"components", {16, 64, 128, 256}},
          {"truncation", {5, 10, 20, 40}}};
}

void apply_axis_value(ModelConfig& cfg, const std::string& axis, int value) {
  if (axis == "embedding_dim") {
    cfg.temporal_dim = value;
    cfg.structural_dim = value;
  } else if (axis == "layers") {
    cfg.layers = value;
  } else if (axis == "components") {
    cfg.components = value;
  } else if (axis == "truncation") {
    cfg.truncation = value;
  } else {
    throw std::invalid_argument("ablation: unknown axis '" + axis + "'");
  }
}

std::vector<AblationCell> run_ablation(const ModelConfig& base, const Split& split,
                                       const std::vector<AblationAxis>& axes,
                                       const std::function<void(const AblationCell&)>& progress) {
  const auto history = concat(split.train, split.valid);
  const int ne = split.train.num_entities();
  const int nr = split.train.num_relations();
  std::vector<AblationCell> cells;
  for (const auto& axis : axes) {
    const auto first = cells.size();
    for (int v : axis.values) {
      AblationCell cell;
      cell.axis = axis.name;
      cell.value = v;

      ModelConfig link = base;
      link.task = Task::kLinks;
      apply_axis_value(link, axis.name, v);
      Model lm(link, ne, nr);
      cell.link_epochs = static_cast<int>(Trainer(lm).fit(split.train, split.valid).epochs.size());
      cell.mrr = evaluate_links(lm, history, split.test, link.use_time_score).mrr.value_or(0.0);

      ModelConfig time = base;
      time.task = Task::kTime;
      apply_axis_value(time, axis.name, v);
      Model tm(time, ne, nr);
      cell.time_epochs = static_cast<int>(Trainer(tm).fit(split.train, split.valid).epochs.size());
      const auto r = evaluate_times(tm, history, split.test);
      if (!r.mae_ticks || !std::isfinite(*r.mae_ticks))
        throw NumericalError("ablation: no finite MAE for " + axis.name + "=" + std::to_string(v));
      cell.mae_ticks = *r.mae_ticks;
      cells.push_back(cell);
    }
    double best_mrr = 0.0, best_mae = std::numeric_limits<double>::infinity();
    for (auto i = first; i < cells.size(); ++i) {
      best_mrr = std::max(best_mrr, cells[i].mrr);
      best_mae = std::min(best_mae, cells[i].mae_ticks);
    }
    for (auto i = first; i < cells.size(); ++i) {
      cells[i].mrr_ratio = best_mrr > 0.0 ? cells[i].mrr / best_mrr : 0.0;
      cells[i].mae_ratio = cells[i].mae_ticks > 0.0 ? best_mae / cells[i].mae_ticks : 1.0;
      if (progress) progress(cells[i]);
    }
  }
  return cells;
}

std::string ablation_table(const std::vector<AblationCell>& cells) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "| axis | value | MRR | MRR / best | MAE (ticks) | best / MAE |\n";
  os << "|---|---:|---:|---:|---:|---:|\n";
  for (const auto& c : cells)
    os << "| " << c.axis << " | " << c.value << " | " << c.mrr << " | " << c.mrr_ratio << " | "
       << c.mae_ticks << " | " << c.mae_ratio << " |\n";
  return os.str();
}

std::string ablation_csv(const std::vector<AblationCell>& cells) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "axis,value,mrr,mrr_ratio,mae_ticks,mae_ratio,link_epochs,time_epochs\n";
  for (const auto& c : cells)
    os << c.axis << ',' << c.value << ',' << c.mrr << ',' << c.mrr_ratio << ',' << c.mae_ticks
       << ',' << c.mae_ratio << ',' << c.link_epochs << ',' << c.time_epochs << '\n';
  return os.str();
}

}  // namespace evokg
