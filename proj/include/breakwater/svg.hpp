#pragma once

#include <string>
#include <vector>

namespace breakwater {

// Minimal line-and-band SVG plotter for convergence curves; CSV stays the
// authoritative output, the SVG is for eyeballing.
struct PlotSeries {
  std::string label;
  std::string color;  // css color
  std::vector<double> x;
  std::vector<double> median;
  std::vector<double> lo;  // band; empty = line only
  std::vector<double> hi;
};

std::string render_line_plot(const std::vector<PlotSeries>& series,
                             const std::string& title,
                             const std::string& x_label,
                             const std::string& y_label);

}  // namespace breakwater
