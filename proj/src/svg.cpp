#include "breakwater/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "breakwater/csv.hpp"

namespace breakwater {

namespace {

constexpr double kW = 760, kH = 480;
constexpr double kMarginLeft = 70, kMarginRight = 160, kMarginTop = 40,
                 kMarginBottom = 55;

double nice_step(double range, int ticks) {
  if (range <= 0) return 1;
  const double raw = range / std::max(1, ticks);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10 * mag;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

}  // namespace

std::string render_line_plot(const std::vector<PlotSeries>& series,
                             const std::string& title,
                             const std::string& x_label,
                             const std::string& y_label) {
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const auto& s : series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      const double lo = s.lo.empty() ? s.median[i] : s.lo[i];
      const double hi = s.hi.empty() ? s.median[i] : s.hi[i];
      if (first) {
        x_min = x_max = s.x[i];
        y_min = lo;
        y_max = hi;
        first = false;
      }
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, lo);
      y_max = std::max(y_max, hi);
    }
  }
  if (x_max <= x_min) x_max = x_min + 1;
  if (y_max <= y_min) y_max = y_min + 1;
  y_min = std::min(0.0, y_min);
  y_max *= 1.05;

  const double pw = kW - kMarginLeft - kMarginRight;
  const double ph = kH - kMarginTop - kMarginBottom;
  auto px = [&](double x) {
    return kMarginLeft + (x - x_min) / (x_max - x_min) * pw;
  };
  auto py = [&](double y) {
    return kMarginTop + ph - (y - y_min) / (y_max - y_min) * ph;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << " " << kH
      << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << title
      << "</text>\n";

  // axes and ticks
  const double xs = nice_step(x_max - x_min, 6);
  const double ys = nice_step(y_max - y_min, 6);
  svg << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (double x = std::ceil(x_min / xs) * xs; x <= x_max + 1e-9; x += xs) {
    svg << "<line x1=\"" << fmt(px(x)) << "\" y1=\"" << kMarginTop
        << "\" x2=\"" << fmt(px(x)) << "\" y2=\"" << kMarginTop + ph
        << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<text x=\"" << fmt(px(x)) << "\" y=\"" << kMarginTop + ph + 16
        << "\" text-anchor=\"middle\">" << fmt(x) << "</text>\n";
  }
  for (double y = std::ceil(y_min / ys) * ys; y <= y_max + 1e-9; y += ys) {
    svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << fmt(py(y))
        << "\" x2=\"" << kMarginLeft + pw << "\" y2=\"" << fmt(py(y))
        << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << fmt(py(y) + 4)
        << "\" text-anchor=\"end\">" << fmt(y) << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\""
      << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  svg << "<text x=\"" << kMarginLeft + pw / 2 << "\" y=\"" << kH - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">"
      << x_label << "</text>\n";
  svg << "<text x=\"18\" y=\"" << kMarginTop + ph / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 18 "
      << kMarginTop + ph / 2 << ")\">" << y_label << "</text>\n";

  // bands then lines
  for (const auto& s : series) {
    if (!s.lo.empty() && s.lo.size() == s.x.size()) {
      svg << "<path d=\"M";
      for (size_t i = 0; i < s.x.size(); ++i)
        svg << fmt(px(s.x[i])) << "," << fmt(py(s.hi[i])) << " ";
      for (size_t i = s.x.size(); i-- > 0;)
        svg << fmt(px(s.x[i])) << "," << fmt(py(s.lo[i])) << " ";
      svg << "Z\" fill=\"" << s.color << "\" fill-opacity=\"0.18\" "
          << "stroke=\"none\"/>\n";
    }
  }
  for (const auto& s : series) {
    svg << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i)
      svg << fmt(px(s.x[i])) << "," << fmt(py(s.median[i])) << " ";
    svg << "\"/>\n";
  }

  // legend
  double ly = kMarginTop + 10;
  for (const auto& s : series) {
    svg << "<rect x=\"" << kMarginLeft + pw + 14 << "\" y=\"" << ly - 9
        << "\" width=\"18\" height=\"6\" fill=\"" << s.color << "\"/>\n";
    svg << "<text x=\"" << kMarginLeft + pw + 38 << "\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label
        << "</text>\n";
    ly += 20;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace breakwater
