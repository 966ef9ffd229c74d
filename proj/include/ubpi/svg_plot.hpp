#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ubpi {

// Minimal SVG chart writer: scatter series, polylines, and filled bands over
// auto-scaled axes. All numbers go through fixed snprintf formats, so the
// same inputs always produce the same bytes.
class SvgPlot {
 public:
  SvgPlot(int width, int height, std::string title = "")
      : width_(width), height_(height), title_(std::move(title)) {}

  void set_axis_labels(std::string x, std::string y) {
    x_label_ = std::move(x);
    y_label_ = std::move(y);
  }

  void add_points(std::span<const double> xs, std::span<const double> ys,
                  std::string color, double radius = 2.5) {
    check_pair(xs, ys);
    Series s;
    s.kind = Series::points;
    s.xs.assign(xs.begin(), xs.end());
    s.ys.assign(ys.begin(), ys.end());
    s.color = std::move(color);
    s.size = radius;
    series_.push_back(std::move(s));
  }

  void add_line(std::span<const double> xs, std::span<const double> ys,
                std::string color, double stroke_width = 1.5) {
    check_pair(xs, ys);
    Series s;
    s.kind = Series::line;
    s.xs.assign(xs.begin(), xs.end());
    s.ys.assign(ys.begin(), ys.end());
    s.color = std::move(color);
    s.size = stroke_width;
    series_.push_back(std::move(s));
  }

  // Filled region between two curves sharing the x grid.
  void add_band(std::span<const double> xs, std::span<const double> lower,
                std::span<const double> upper, std::string color,
                double opacity = 0.35) {
    check_pair(xs, lower);
    check_pair(xs, upper);
    Series s;
    s.kind = Series::band;
    s.xs.assign(xs.begin(), xs.end());
    s.ys.assign(lower.begin(), lower.end());
    s.ys2.assign(upper.begin(), upper.end());
    s.color = std::move(color);
    s.size = opacity;
    series_.push_back(std::move(s));
  }

  std::string render() const {
    if (series_.empty()) throw std::runtime_error("SvgPlot: nothing to draw");
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const Series& s : series_) {
      for (double x : s.xs) {
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
      }
      for (const auto* ys : {&s.ys, &s.ys2})
        for (double y : *ys) {
          y_lo = std::min(y_lo, y);
          y_hi = std::max(y_hi, y);
        }
    }
    if (x_hi <= x_lo) x_hi = x_lo + 1.0;
    if (y_hi <= y_lo) y_hi = y_lo + 1.0;
    const double x_pad = 0.04 * (x_hi - x_lo);
    const double y_pad = 0.06 * (y_hi - y_lo);
    x_lo -= x_pad;
    x_hi += x_pad;
    y_lo -= y_pad;
    y_hi += y_pad;

    const double left = 58, right = 16, top = title_.empty() ? 16 : 34;
    const double bottom = 44;
    const double plot_w = width_ - left - right;
    const double plot_h = height_ - top - bottom;
    auto px = [&](double x) {
      return left + (x - x_lo) / (x_hi - x_lo) * plot_w;
    };
    auto py = [&](double y) {
      return top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;
    };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_
        << "\" height=\"" << height_ << "\" viewBox=\"0 0 " << width_ << ' '
        << height_ << "\">\n";
    out << "<rect width=\"" << width_ << "\" height=\"" << height_
        << "\" fill=\"white\"/>\n";

    // Grid and tick labels.
    out << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
    const auto x_ticks = nice_ticks(x_lo, x_hi);
    const auto y_ticks = nice_ticks(y_lo, y_hi);
    for (double t : x_ticks)
      out << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << fmt(top)
          << "\" x2=\"" << fmt(px(t)) << "\" y2=\"" << fmt(top + plot_h)
          << "\"/>\n";
    for (double t : y_ticks)
      out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(py(t))
          << "\" x2=\"" << fmt(left + plot_w) << "\" y2=\"" << fmt(py(t))
          << "\"/>\n";
    out << "</g>\n";
    out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
    for (double t : x_ticks)
      out << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(top + plot_h + 16)
          << "\" text-anchor=\"middle\">" << label(t) << "</text>\n";
    for (double t : y_ticks)
      out << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(py(t) + 4)
          << "\" text-anchor=\"end\">" << label(t) << "</text>\n";
    if (!x_label_.empty())
      out << "<text x=\"" << fmt(left + plot_w / 2) << "\" y=\""
          << fmt(top + plot_h + 34) << "\" text-anchor=\"middle\">" << x_label_
          << "</text>\n";
    if (!y_label_.empty())
      out << "<text x=\"" << fmt(14.0) << "\" y=\"" << fmt(top + plot_h / 2)
          << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
          << fmt(top + plot_h / 2) << ")\">" << y_label_ << "</text>\n";
    if (!title_.empty())
      out << "<text x=\"" << fmt(left + plot_w / 2)
          << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title_
          << "</text>\n";
    out << "</g>\n";

    for (const Series& s : series_) {
      switch (s.kind) {
        case Series::band: {
          out << "<polygon fill=\"" << s.color << "\" fill-opacity=\""
              << fmt(s.size) << "\" stroke=\"none\" points=\"";
          for (std::size_t i = 0; i < s.xs.size(); ++i)
            out << fmt(px(s.xs[i])) << ',' << fmt(py(s.ys2[i])) << ' ';
          for (std::size_t i = s.xs.size(); i-- > 0;)
            out << fmt(px(s.xs[i])) << ',' << fmt(py(s.ys[i])) << ' ';
          out << "\"/>\n";
          break;
        }
        case Series::line: {
          out << "<polyline fill=\"none\" stroke=\"" << s.color
              << "\" stroke-width=\"" << fmt(s.size) << "\" points=\"";
          for (std::size_t i = 0; i < s.xs.size(); ++i)
            out << fmt(px(s.xs[i])) << ',' << fmt(py(s.ys[i])) << ' ';
          out << "\"/>\n";
          break;
        }
        case Series::points: {
          out << "<g fill=\"" << s.color << "\">\n";
          for (std::size_t i = 0; i < s.xs.size(); ++i)
            out << "<circle cx=\"" << fmt(px(s.xs[i])) << "\" cy=\""
                << fmt(py(s.ys[i])) << "\" r=\"" << fmt(s.size) << "\"/>\n";
          out << "</g>\n";
          break;
        }
      }
    }

    out << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\""
        << fmt(plot_w) << "\" height=\"" << fmt(plot_h)
        << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
    out << "</svg>\n";
    return out.str();
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write SVG file: " + path);
    out << render();
  }

 private:
  struct Series {
    enum Kind { points, line, band } kind = points;
    std::vector<double> xs, ys, ys2;
    std::string color;
    double size = 1.0;
  };

  static void check_pair(std::span<const double> xs,
                         std::span<const double> ys) {
    if (xs.empty() || xs.size() != ys.size())
      throw std::invalid_argument("SvgPlot: series sizes mismatch or empty");
  }

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
  }

  static std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
  }

  // Around 5 ticks at a 1/2/5 x 10^k step.
  static std::vector<double> nice_ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double mult : {1.0, 2.0, 5.0, 10.0}) {
      if (mag * mult >= raw) {
        step = mag * mult;
        break;
      }
    }
    std::vector<double> ticks;
    double t = std::ceil(lo / step) * step;
    for (; t <= hi + 1e-12 * span; t += step) {
      ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
    }
    return ticks;
  }

  int width_;
  int height_;
  std::string title_;
  std::string x_label_;
  std::string y_label_;
  std::vector<Series> series_;
};

}  // namespace ubpi
