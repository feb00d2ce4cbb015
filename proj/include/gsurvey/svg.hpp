#pragma once

// Standalone SVG line charts for ECDF and power-curve output.
//
// Each series is drawn as a <polyline> that also carries its data in
// data-series / data-x / data-y attributes, so tests and scripts can compare
// plotted values structurally instead of diffing pixels.

#include <filesystem>
#include <string>
#include <vector>

namespace gsurvey {

struct ChartSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<ChartSeries> series;
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
  bool log_x = false;
  bool diagonal = false;  // dashed y = x reference line
};

std::string render_svg(const LineChart& chart);
void write_svg(const std::filesystem::path& path, const LineChart& chart);

// Recovers the data attributes of every series in a rendered chart.
std::vector<ChartSeries> parse_svg_series(const std::string& svg);

}  // namespace gsurvey
