#pragma once

#include <string>
#include <vector>

namespace dpgd {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color;  // empty = palette
};

struct ChartOptions {
  std::string title;
  std::string x_label = "iteration";
  std::string y_label;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

/// Standalone SVG line chart with axes, ticks and a legend. Non-positive points are
/// dropped on a log axis; non-finite points are always dropped.
std::string render_line_chart(const std::vector<Series>& series, const ChartOptions& opts);

}  // namespace dpgd
