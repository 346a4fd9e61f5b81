#pragma once

// Bare-bones SVG line charts for loss curves and per-tick metrics.

#include <filesystem>
#include <string>
#include <vector>

namespace evokg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series);

void write_svg(const std::filesystem::path& path, const std::string& svg);

}  // namespace evokg
