#pragma once

#include <string>
#include <vector>

namespace ginc {

struct PlotSeries {
  std::string label;
  std::vector<double> y;  // one value per x tick; NaN leaves a gap
};

// Line chart over categorical x positions, written as a standalone SVG.
struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> x_ticks;
  std::vector<PlotSeries> series;
  double y_min = 0.0;
  double y_max = 1.0;
};

std::string render_svg(const LinePlot& plot);

}  // namespace ginc
