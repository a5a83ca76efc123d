#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tikholearn {
namespace detail {

// Minimal hand-written SVG output; no plotting dependency.

struct SvgCanvas {
  static constexpr double width = 640.0;
  static constexpr double height = 420.0;
  static constexpr double margin = 50.0;

  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;

  double px(double x) const {
    return margin + (x - x_min) / (x_max - x_min) * (width - 2 * margin);
  }
  double py(double y) const {
    return height - margin - (y - y_min) / (y_max - y_min) * (height - 2 * margin);
  }
};

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline void svg_header(std::ofstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
         "viewBox=\"0 0 640 420\">\n"
      << "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n"
      << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
         "font-family=\"sans-serif\">" << title << "</text>\n";
}

inline void svg_axes(std::ofstream& out, const SvgCanvas& c,
                     const std::string& x_label, const std::string& y_label) {
  out << "<line x1=\"" << svg_num(c.margin) << "\" y1=\"" << svg_num(c.height - c.margin)
      << "\" x2=\"" << svg_num(c.width - c.margin) << "\" y2=\""
      << svg_num(c.height - c.margin) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << svg_num(c.margin) << "\" y1=\"" << svg_num(c.margin)
      << "\" x2=\"" << svg_num(c.margin) << "\" y2=\"" << svg_num(c.height - c.margin)
      << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = c.x_min + k * (c.x_max - c.x_min) / 4.0;
    const double fy = c.y_min + k * (c.y_max - c.y_min) / 4.0;
    out << "<text x=\"" << svg_num(c.px(fx)) << "\" y=\"" << svg_num(c.height - c.margin + 18)
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
        << svg_num(fx) << "</text>\n";
    out << "<text x=\"" << svg_num(c.margin - 6) << "\" y=\"" << svg_num(c.py(fy) + 4)
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
        << svg_num(fy) << "</text>\n";
  }
  out << "<text x=\"" << svg_num(c.width / 2) << "\" y=\"" << svg_num(c.height - 10)
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
      << x_label << "</text>\n";
  out << "<text x=\"14\" y=\"" << svg_num(c.height / 2)
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
         "transform=\"rotate(-90 14 " << svg_num(c.height / 2) << ")\">"
      << y_label << "</text>\n";
}

/// Sturges' rule bin count.
inline int sturges_bins(std::size_t n) {
  if (n < 2) return 1;
  return static_cast<int>(std::ceil(std::log2(static_cast<double>(n)))) + 1;
}

inline void write_histogram_svg(const std::string& path,
                                const std::vector<double>& values,
                                const std::string& title,
                                const std::string& x_label) {
  if (values.empty()) throw std::invalid_argument("no data");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);

  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  int bins = sturges_bins(values.size());
  if (!(hi > lo)) {
    bins = 1;
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    auto k = static_cast<std::size_t>((v - lo) / (hi - lo) * bins);
    if (k >= counts.size()) k = counts.size() - 1;
    ++counts[k];
  }
  const int peak = *std::max_element(counts.begin(), counts.end());

  SvgCanvas c;
  c.x_min = lo;
  c.x_max = hi;
  c.y_min = 0.0;
  c.y_max = static_cast<double>(peak);

  svg_header(out, title);
  svg_axes(out, c, x_label, "count");
  for (int k = 0; k < bins; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) continue;
    const double x0 = lo + k * (hi - lo) / bins;
    const double x1 = lo + (k + 1) * (hi - lo) / bins;
    const double top = c.py(counts[static_cast<std::size_t>(k)]);
    out << "<rect class=\"bar\" x=\"" << svg_num(c.px(x0)) << "\" y=\"" << svg_num(top)
        << "\" width=\"" << svg_num(c.px(x1) - c.px(x0)) << "\" height=\""
        << svg_num(c.py(0.0) - top) << "\" fill=\"steelblue\" stroke=\"white\"/>\n";
  }
  out << "</svg>\n";
}

/// Index-vs-value scatter with two overlaid series.
inline void write_scatter_svg(const std::string& path,
                              const std::vector<double>& series_a,
                              const std::vector<double>& series_b,
                              const std::string& title,
                              const std::string& label_a,
                              const std::string& label_b) {
  if (series_a.empty()) throw std::invalid_argument("no data");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);

  double lo = series_a.front(), hi = series_a.front();
  for (double v : series_a) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : series_b) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }

  SvgCanvas c;
  c.x_min = 0.0;
  c.x_max = static_cast<double>(std::max(series_a.size(), series_b.size()) - 1);
  if (c.x_max <= 0.0) c.x_max = 1.0;
  c.y_min = lo;
  c.y_max = hi;

  svg_header(out, title);
  svg_axes(out, c, "instance", "parameter");
  for (std::size_t i = 0; i < series_a.size(); ++i)
    out << "<circle cx=\"" << svg_num(c.px(static_cast<double>(i))) << "\" cy=\""
        << svg_num(c.py(series_a[i])) << "\" r=\"3.5\" fill=\"none\" "
           "stroke=\"crimson\"/>\n";
  for (std::size_t i = 0; i < series_b.size(); ++i)
    out << "<circle cx=\"" << svg_num(c.px(static_cast<double>(i))) << "\" cy=\""
        << svg_num(c.py(series_b[i])) << "\" r=\"2\" fill=\"steelblue\"/>\n";
  out << "<circle cx=\"470\" cy=\"40\" r=\"3.5\" fill=\"none\" stroke=\"crimson\"/>"
      << "<text x=\"480\" y=\"44\" font-size=\"12\" font-family=\"sans-serif\">"
      << label_a << "</text>\n"
      << "<circle cx=\"550\" cy=\"40\" r=\"2\" fill=\"steelblue\"/>"
      << "<text x=\"560\" y=\"44\" font-size=\"12\" font-family=\"sans-serif\">"
      << label_b << "</text>\n";
  out << "</svg>\n";
}

}  // namespace detail
}  // namespace tikholearn
