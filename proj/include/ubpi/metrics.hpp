#pragma once

#include <cstdio>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>

#include "ubpi/losses.hpp"
#include "ubpi/model.hpp"

namespace ubpi {

// Hard evaluation measures on one split. mpiw is on the standardized target
// scale; mpiw_raw is the same width mapped back to original units.
struct EvalReport {
  double picp = 0.0;
  double mpiw = 0.0;
  double mpiw_raw = 0.0;
  double mse_midpoint = 0.0;
  double crossing_rate = 0.0;
  std::size_t n = 0;

  static std::string csv_header() {
    return "n,picp,mpiw,mpiw_raw,mse_midpoint,crossing_rate";
  }

  std::string csv_row() const {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g", n,
                  picp, mpiw, mpiw_raw, mse_midpoint, crossing_rate);
    return buf;
  }

  void write_kv(std::ostream& out) const {
    char buf[64];
    auto line = [&](const char* key, double v) {
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      out << key << ' ' << buf << '\n';
    };
    out << "n " << n << '\n';
    line("picp", picp);
    line("mpiw", mpiw);
    line("mpiw_raw", mpiw_raw);
    line("mse_midpoint", mse_midpoint);
    line("crossing_rate", crossing_rate);
  }
};

// Fraction of targets inside their closed interval [lower, upper].
inline double picp_hard(std::span<const Interval> intervals,
                        std::span<const double> ys) {
  if (intervals.empty()) throw std::invalid_argument("picp_hard: empty batch");
  if (intervals.size() != ys.size())
    throw std::invalid_argument("picp_hard: mismatched sizes");
  std::size_t covered = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i)
    if (intervals[i].lower <= ys[i] && ys[i] <= intervals[i].upper) ++covered;
  return static_cast<double>(covered) /
         static_cast<double>(intervals.size());
}

inline double crossing_rate(std::span<const Interval> intervals) {
  if (intervals.empty())
    throw std::invalid_argument("crossing_rate: empty batch");
  std::size_t crossed = 0;
  for (const Interval& iv : intervals)
    if (iv.upper < iv.lower) ++crossed;
  return static_cast<double>(crossed) /
         static_cast<double>(intervals.size());
}

inline EvalReport evaluate(std::span<const Interval> intervals,
                           std::span<const double> ys,
                           double target_std = 1.0) {
  EvalReport r;
  r.n = intervals.size();
  r.picp = picp_hard(intervals, ys);
  r.mpiw = mpiw(intervals);
  r.mpiw_raw = r.mpiw * target_std;
  r.mse_midpoint = mse_midpoint(intervals, ys);
  r.crossing_rate = crossing_rate(intervals);
  return r;
}

inline EvalReport evaluate(const NetworkParams& net, const Batch& standardized,
                           double target_std = 1.0) {
  if (!net.finite())
    throw std::runtime_error("evaluate: model parameters are not finite");
  if (standardized.n == 0)
    throw std::invalid_argument("evaluate: empty split");
  const auto intervals = predict(net, standardized);
  return evaluate(intervals, standardized.targets, target_std);
}

}  // namespace ubpi
