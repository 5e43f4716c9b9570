#pragma once

#include <string>
#include <vector>

#include "hprobe/linalg.hpp"

namespace hprobe {

// Static SVG charts. Output is deterministic for identical input.

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lo;  // optional error band, same length as y
  std::vector<double> hi;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_x = false;
};

std::string svg_line_plot(const LinePlot& plot);

/// Values annotated in each cell; colour scale fixed to [lo, hi].
std::string svg_heatmap(const std::string& title, const Matrix& values, const std::vector<std::string>& labels,
                        double lo = 0.0, double hi = 1.0);

struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> groups;  // x categories
  std::vector<std::string> series;  // one bar per series inside a group
  Matrix values;                    // groups x series
};

std::string svg_bar_chart(const BarChart& chart);

/// Several SVG panels side by side in one document.
std::string svg_row(const std::vector<std::string>& panels, int panel_width = 520, int panel_height = 360);

}  // namespace hprobe
