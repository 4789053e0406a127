#include "ginc/svg_plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

namespace ginc {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

constexpr std::array<const char*, 8> kColours = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                 "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const LinePlot& plot) {
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const std::size_t n_x = std::max<std::size_t>(plot.x_ticks.size(), 1);
  const double span = plot.y_max > plot.y_min ? plot.y_max - plot.y_min : 1.0;
  auto px = [&](std::size_t i) {
    return n_x == 1 ? kLeft + plot_w / 2.0
                    : kLeft + plot_w * static_cast<double>(i) / static_cast<double>(n_x - 1);
  };
  auto py = [&](double y) { return kTop + plot_h * (1.0 - (y - plot.y_min) / span); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kWidth, kHeight);
  svg += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     kLeft + plot_w / 2.0, escape(plot.title));

  for (int t = 0; t <= 5; ++t) {
    const double y = plot.y_min + span * t / 5.0;
    svg += fmt::format(
        "<line x1=\"{0}\" x2=\"{1}\" y1=\"{2:.2f}\" y2=\"{2:.2f}\" stroke=\"#dddddd\"/>\n"
        "<text x=\"{3}\" y=\"{4:.2f}\" text-anchor=\"end\">{5:.2f}</text>\n",
        kLeft, kLeft + plot_w, py(y), kLeft - 6.0, py(y) + 4.0, y);
  }
  for (std::size_t i = 0; i < plot.x_ticks.size(); ++i) {
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", px(i),
                       kTop + plot_h + 18.0, escape(plot.x_ticks[i]));
  }
  svg += fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
      kLeft, kTop, plot_w, plot_h);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                     kLeft + plot_w / 2.0, kHeight - 18.0, escape(plot.x_label));
  svg += fmt::format(
      "<text x=\"18\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0})\">{1}</text>\n",
      kTop + plot_h / 2.0, escape(plot.y_label));

  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    const PlotSeries& series = plot.series[s];
    const char* colour = kColours[s % kColours.size()];
    std::string path;
    bool pen_down = false;
    for (std::size_t i = 0; i < series.y.size() && i < n_x; ++i) {
      if (!std::isfinite(series.y[i])) {
        pen_down = false;
        continue;
      }
      const double y = std::clamp(series.y[i], plot.y_min, plot.y_max);
      path += fmt::format("{}{:.2f},{:.2f} ", pen_down ? "L" : "M", px(i), py(y));
      pen_down = true;
      svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", px(i), py(y),
                         colour);
    }
    if (!path.empty()) {
      svg += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", path,
                         colour);
    }
    const double ly = kTop + 10.0 + 18.0 * static_cast<double>(s);
    svg += fmt::format(
        "<line x1=\"{0}\" x2=\"{1}\" y1=\"{2}\" y2=\"{2}\" stroke=\"{3}\" stroke-width=\"2\"/>\n"
        "<text x=\"{4}\" y=\"{5}\">{6}</text>\n",
        kLeft + plot_w + 12.0, kLeft + plot_w + 32.0, ly, colour, kLeft + plot_w + 38.0, ly + 4.0,
        escape(series.label));
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace ginc
