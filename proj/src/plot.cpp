#include "hprobe/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "hprobe/error.hpp"

namespace hprobe {

namespace {

constexpr int kWidth = 520;
constexpr int kHeight = 360;
constexpr double kLeft = 64.0;
constexpr double kRight = 140.0;  // legend column
constexpr double kTop = 36.0;
constexpr double kBottom = 48.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

const char* colour(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof kPalette[0])]; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tick_label(double v) {
  char buf[32];
  if (v != 0.0 && (std::abs(v) >= 1e4 || std::abs(v) < 1e-3)) {
    std::snprintf(buf, sizeof buf, "%.0e", v);
  } else {
    std::snprintf(buf, sizeof buf, "%g", v);
  }
  return buf;
}

// Round tick positions covering [lo, hi].
std::vector<double> ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= target) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step - 1e-9) * step; t <= hi + 1e-9 * step; t += step) {
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return out;
}

std::string open_svg(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 11,
                 const std::string& extra = "") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\" font-size=\"" +
         std::to_string(size) + "\"" + extra + ">" + escape(s) + "</text>\n";
}

struct Frame {
  double x0, x1, y0, y1;  // data range
  bool log_x = false;
  double px(double x) const {
    const double a = log_x ? std::log10(x) : x;
    const double lo = log_x ? std::log10(x0) : x0;
    const double hi = log_x ? std::log10(x1) : x1;
    return kLeft + (a - lo) / (hi - lo) * (kWidth - kLeft - kRight);
  }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

std::string axes(const Frame& f, const std::string& title, const std::string& xl, const std::string& yl,
                 const std::vector<double>& xt, const std::vector<double>& yt) {
  std::string s;
  s += text(kWidth / 2.0, 20, title, "middle", 13, " font-weight=\"bold\"");
  const double bx = kLeft;
  const double by = kHeight - kBottom;
  const double ex = kWidth - kRight;
  s += "<rect x=\"" + num(bx) + "\" y=\"" + num(kTop) + "\" width=\"" + num(ex - bx) + "\" height=\"" +
       num(by - kTop) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double t : yt) {
    const double y = f.py(t);
    s += "<line x1=\"" + num(bx) + "\" y1=\"" + num(y) + "\" x2=\"" + num(ex) + "\" y2=\"" + num(y) +
         "\" stroke=\"#ddd\"/>\n";
    s += text(bx - 6, y + 4, tick_label(t), "end");
  }
  for (double t : xt) {
    const double x = f.px(t);
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(by) + "\" x2=\"" + num(x) + "\" y2=\"" + num(by + 4) +
         "\" stroke=\"#444\"/>\n";
    s += text(x, by + 16, tick_label(t));
  }
  s += text((bx + ex) / 2.0, kHeight - 10, xl);
  s += "<text x=\"16\" y=\"" + num((kTop + by) / 2.0) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num((kTop + by) / 2.0) + ")\">" + escape(yl) + "</text>\n";
  return s;
}

std::string legend(const std::vector<std::string>& names) {
  std::string s;
  const double x = kWidth - kRight + 12;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 8 + 18.0 * static_cast<double>(i);
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y - 8) + "\" width=\"12\" height=\"10\" fill=\"" + colour(i) + "\"/>\n";
    s += text(x + 18, y + 1, names[i], "start");
  }
  return s;
}

}  // namespace

std::string svg_line_plot(const LinePlot& plot) {
  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -x0;
  double y0 = x0;
  double y1 = -x0;
  for (const auto& s : plot.series) {
    if (s.x.size() != s.y.size()) throw InputError("series " + s.name + ": x and y differ in length");
    const bool band = !s.lo.empty();
    if (band && (s.lo.size() != s.y.size() || s.hi.size() != s.y.size())) {
      throw InputError("series " + s.name + ": error band length differs from y");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, band ? s.lo[i] : s.y[i]);
      y1 = std::max(y1, band ? s.hi[i] : s.y[i]);
    }
  }
  if (!(x0 <= x1)) {
    x0 = 0.0;
    x1 = 1.0;
    y0 = 0.0;
    y1 = 1.0;
  }
  if (plot.log_x && x0 <= 0.0) throw InputError("log x axis needs positive x values");
  if (x1 == x0) {
    x0 -= plot.log_x ? x0 / 2.0 : 1.0;
    x1 += plot.log_x ? x1 : 1.0;
  }
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const auto yt = ticks(y0, y1);
  y0 = std::min(y0, yt.front());
  y1 = std::max(y1, yt.back());
  const double pad = 0.04 * (y1 - y0);
  Frame f{x0, x1, y0 - pad, y1 + pad, plot.log_x};
  std::vector<double> xt;
  if (plot.log_x) {
    for (const auto& s : plot.series) xt.insert(xt.end(), s.x.begin(), s.x.end());
    std::sort(xt.begin(), xt.end());
    xt.erase(std::unique(xt.begin(), xt.end()), xt.end());
  } else {
    xt = ticks(x0, x1, 8);
  }

  std::string out = open_svg(kWidth, kHeight);
  out += axes(f, plot.title, plot.x_label, plot.y_label, xt, yt);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    names.push_back(s.name);
    if (!s.lo.empty()) {
      std::string poly;
      for (std::size_t i = 0; i < s.x.size(); ++i) poly += num(f.px(s.x[i])) + "," + num(f.py(s.hi[i])) + " ";
      for (std::size_t i = s.x.size(); i-- > 0;) poly += num(f.px(s.x[i])) + "," + num(f.py(s.lo[i])) + " ";
      out += "<polygon points=\"" + poly + "\" fill=\"" + colour(k) + "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isfinite(s.y[i])) pts += num(f.px(s.x[i])) + "," + num(f.py(s.y[i])) + " ";
    }
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + colour(k) + "\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      out += "<circle cx=\"" + num(f.px(s.x[i])) + "\" cy=\"" + num(f.py(s.y[i])) + "\" r=\"2.5\" fill=\"" +
             colour(k) + "\"/>\n";
    }
  }
  out += legend(names);
  return out + "</svg>\n";
}

std::string svg_heatmap(const std::string& title, const Matrix& values, const std::vector<std::string>& labels,
                        double lo, double hi) {
  const auto n = values.rows();
  if (values.cols() != n || static_cast<Eigen::Index>(labels.size()) != n) {
    throw InputError("heatmap needs a square matrix with one label per row");
  }
  if (!(hi > lo)) throw InputError("heatmap colour range is empty");
  const int w = 360;
  const int h = 360;
  const double x0 = 60.0;
  const double y0 = 40.0;
  const double cell = (w - x0 - 20.0) / std::max<Eigen::Index>(n, 1);
  std::string out = open_svg(w, h);
  out += text(w / 2.0, 22, title, "middle", 13, " font-weight=\"bold\"");
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double t = std::clamp((values(i, j) - lo) / (hi - lo), 0.0, 1.0);
      // White to deep blue.
      const int r = static_cast<int>(std::lround(255 - 225 * t));
      const int g = static_cast<int>(std::lround(255 - 160 * t));
      const int b = static_cast<int>(std::lround(255 - 75 * t));
      char fill[16];
      std::snprintf(fill, sizeof fill, "#%02x%02x%02x", r, g, b);
      const double cx = x0 + cell * static_cast<double>(j);
      const double cy = y0 + cell * static_cast<double>(i);
      out += "<rect x=\"" + num(cx) + "\" y=\"" + num(cy) + "\" width=\"" + num(cell) + "\" height=\"" + num(cell) +
             "\" fill=\"" + fill + "\" stroke=\"white\"/>\n";
      out += text(cx + cell / 2.0, cy + cell / 2.0 + 4, num(values(i, j)), "middle", 10,
                  t > 0.6 ? " fill=\"white\"" : "");
    }
    out += text(x0 - 6, y0 + cell * (static_cast<double>(i) + 0.5) + 4, labels[static_cast<std::size_t>(i)], "end");
    out += text(x0 + cell * (static_cast<double>(i) + 0.5), y0 + cell * static_cast<double>(n) + 14,
                labels[static_cast<std::size_t>(i)]);
  }
  return out + "</svg>\n";
}

std::string svg_bar_chart(const BarChart& chart) {
  const auto g = static_cast<Eigen::Index>(chart.groups.size());
  const auto s = static_cast<Eigen::Index>(chart.series.size());
  if (chart.values.rows() != g || chart.values.cols() != s) throw InputError("bar chart values must be groups x series");
  double lo = 0.0;
  double hi = 0.0;
  if (chart.values.size() > 0) {
    lo = std::min(0.0, chart.values.minCoeff());
    hi = std::max(0.0, chart.values.maxCoeff());
  }
  if (hi == lo) hi = lo + 1.0;
  const auto yt = ticks(lo, hi);
  Frame f{0.0, static_cast<double>(std::max<Eigen::Index>(g, 1)), std::min(lo, yt.front()), std::max(hi, yt.back())};
  std::string out = open_svg(kWidth, kHeight);
  out += axes(f, chart.title, "", chart.y_label, {}, yt);
  const double slot = f.px(1.0) - f.px(0.0);
  const double bar = 0.8 * slot / static_cast<double>(std::max<Eigen::Index>(s, 1));
  for (Eigen::Index i = 0; i < g; ++i) {
    const double left = f.px(static_cast<double>(i)) + 0.1 * slot;
    for (Eigen::Index k = 0; k < s; ++k) {
      const double v = chart.values(i, k);
      const double ya = f.py(std::max(v, 0.0));
      const double yb = f.py(std::min(v, 0.0));
      out += "<rect x=\"" + num(left + bar * static_cast<double>(k)) + "\" y=\"" + num(ya) + "\" width=\"" +
             num(bar * 0.92) + "\" height=\"" + num(std::max(yb - ya, 0.5)) + "\" fill=\"" +
             colour(static_cast<std::size_t>(k)) + "\"/>\n";
    }
    out += text(f.px(static_cast<double>(i) + 0.5), kHeight - kBottom + 16, chart.groups[static_cast<std::size_t>(i)]);
  }
  out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(f.py(0.0)) + "\" x2=\"" + num(kWidth - kRight) + "\" y2=\"" +
         num(f.py(0.0)) + "\" stroke=\"#444\"/>\n";
  out += legend(chart.series);
  return out + "</svg>\n";
}

std::string svg_row(const std::vector<std::string>& panels, int panel_width, int panel_height) {
  const int w = panel_width * static_cast<int>(std::max<std::size_t>(panels.size(), 1));
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
                    std::to_string(panel_height) + "\">\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    // Nested <svg> elements keep each panel's own coordinate system.
    std::string p = panels[i];
    const auto at = p.find("<svg ");
    if (at == std::string::npos) throw InputError("panel is not an SVG document");
    p.insert(at + 5, "x=\"" + std::to_string(static_cast<int>(i) * panel_width) + "\" ");
    out += p;
  }
  return out + "</svg>\n";
}

}  // namespace hprobe
