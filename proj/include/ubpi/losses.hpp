#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "ubpi/autodiff.hpp"
#include "ubpi/model.hpp"

namespace ubpi {

// Hyper-parameters of the interval losses.
//
// The default lambda is sized against the batch-scaled uncertainty term:
// L_UE carries an n/2 factor, so the coverage penalty needs a weight of this
// order before it can hold PICP near pc at the default batch size of 100.
// The default soften keeps the coverage sigmoid wide enough to pass gradient
// through points a few tenths of a standardized unit away from a bound;
// much larger values leave the penalty blind between samples.
struct LossConfig {
  double pc = 0.95;        // predefined confidence level
  double lambda = 1000.0;  // coverage/width trade-off weight
  double soften = 30.0;    // sigmoid factor of the soft coverage indicator
  double mpiw_floor = 1e-6;  // keeps the log term defined on crossed batches

  void validate() const {
    if (!(pc > 0.0 && pc < 1.0))
      throw std::invalid_argument("LossConfig: pc must be in (0,1)");
    if (!(lambda >= 0.0))
      throw std::invalid_argument("LossConfig: lambda must be >= 0");
    if (!(soften > 0.0))
      throw std::invalid_argument("LossConfig: soften must be > 0");
    if (!(mpiw_floor > 0.0))
      throw std::invalid_argument("LossConfig: mpiw_floor must be > 0");
  }
};

// Evaluated terms of one hybrid-loss computation.
struct LossBreakdown {
  double total = 0.0;
  double l_ue = 0.0;
  double l_pi = 0.0;
  double mse = 0.0;
  double mpiw = 0.0;
  double picp_soft = 0.0;
};

// ---------------------------------------------------------------------------
// Tape builders. These record the loss as a differentiable computation on
// the caller's tape, downstream of whatever produced the bound nodes (leaves
// in the value-level wrappers, the network forward pass in the trainer).

// Node refs of the hybrid-loss terms.
struct HybridTerms {
  ad::Ref total, l_ue, l_pi, mse, mpiw, picp_soft;
};

// Soft coverage of one sample: sigmoid(s(U-y)) * sigmoid(s(y-L)).
inline ad::Ref build_soft_coverage(ad::Tape& tape, ad::Ref lower,
                                   ad::Ref upper, double y, double s) {
  return ad::sigmoid((upper - y) * s) * ad::sigmoid((tape.constant(y) - lower) * s);
}

namespace detail {

inline void check_bounds(std::span<const ad::Ref> lower,
                         std::span<const ad::Ref> upper,
                         std::span<const double> ys) {
  if (lower.empty()) throw std::invalid_argument("loss: empty batch");
  if (lower.size() != upper.size() || lower.size() != ys.size())
    throw std::invalid_argument("loss: mismatched bound/target counts");
}

}  // namespace detail

inline ad::Ref build_picp_soft(ad::Tape& tape, std::span<const ad::Ref> lower,
                               std::span<const ad::Ref> upper,
                               std::span<const double> ys, double s) {
  detail::check_bounds(lower, upper, ys);
  std::vector<ad::Ref> cover(lower.size());
  for (std::size_t i = 0; i < lower.size(); ++i)
    cover[i] = build_soft_coverage(tape, lower[i], upper[i], ys[i], s);
  return ad::mean(cover);
}

inline ad::Ref build_mpiw(ad::Tape& tape, std::span<const ad::Ref> lower,
                          std::span<const ad::Ref> upper) {
  if (lower.empty()) throw std::invalid_argument("loss: empty batch");
  std::vector<ad::Ref> widths(lower.size());
  for (std::size_t i = 0; i < lower.size(); ++i)
    widths[i] = tape.sub(upper[i], lower[i]);
  return ad::mean(widths);
}

inline ad::Ref build_mse_midpoint(ad::Tape& tape,
                                  std::span<const ad::Ref> lower,
                                  std::span<const ad::Ref> upper,
                                  std::span<const double> ys) {
  detail::check_bounds(lower, upper, ys);
  std::vector<ad::Ref> errors(lower.size());
  for (std::size_t i = 0; i < lower.size(); ++i) {
    const ad::Ref mid = (lower[i] + upper[i]) * 0.5;
    errors[i] = ad::square(tape.constant(ys[i]) - mid);
  }
  return ad::mean(errors);
}

// midpoint -> MSE -> MPIW -> soft coverage -> soft PICP -> L_UE -> L_PI ->
// L = L_UE + lambda * L_PI. The MPIW entering L_UE is floored at
// config.mpiw_floor so the log stays defined when intervals cross.
inline HybridTerms build_hybrid_loss(ad::Tape& tape,
                                     std::span<const ad::Ref> lower,
                                     std::span<const ad::Ref> upper,
                                     std::span<const double> ys,
                                     const LossConfig& config) {
  config.validate();
  detail::check_bounds(lower, upper, ys);
  const double n = static_cast<double>(ys.size());

  HybridTerms t;
  t.mse = build_mse_midpoint(tape, lower, upper, ys);
  t.mpiw = build_mpiw(tape, lower, upper);
  t.picp_soft = build_picp_soft(tape, lower, upper, ys, config.soften);
  const ad::Ref floored = ad::max(t.mpiw, config.mpiw_floor);
  t.l_ue = (t.mse / floored + ad::log(floored)) * (n / 2.0);
  t.l_pi = ad::square(ad::max(tape.constant(config.pc) - t.picp_soft, 0.0));
  t.total = t.l_ue + t.l_pi * config.lambda;
  return t;
}

inline LossBreakdown read_breakdown(const ad::Tape& tape,
                                    const HybridTerms& t) {
  LossBreakdown b;
  b.total = tape.value(t.total);
  b.l_ue = tape.value(t.l_ue);
  b.l_pi = tape.value(t.l_pi);
  b.mse = tape.value(t.mse);
  b.mpiw = tape.value(t.mpiw);
  b.picp_soft = tape.value(t.picp_soft);
  return b;
}

// (MPIW/r)(1 + exp(lambda * max(0, (1-alpha) - PICP))) with the soft PICP
// substituted so the loss is trainable by gradient descent. r is the
// numerical range of the target variable; MPIW enters raw.
inline ad::Ref build_lube_loss(ad::Tape& tape, std::span<const ad::Ref> lower,
                               std::span<const ad::Ref> upper,
                               std::span<const double> ys,
                               const LossConfig& config, double target_range) {
  config.validate();
  if (!(target_range > 0.0))
    throw std::invalid_argument("lube_loss: target range must be > 0");
  detail::check_bounds(lower, upper, ys);
  const ad::Ref mpiw = build_mpiw(tape, lower, upper);
  const ad::Ref picp = build_picp_soft(tape, lower, upper, ys, config.soften);
  const ad::Ref deficit = ad::max(tape.constant(config.pc) - picp, 0.0);
  return (mpiw / target_range) * (ad::exp(deficit * config.lambda) + 1.0);
}

// MPIW + lambda * ReLU((1-alpha) - PICP), soft PICP substituted.
inline ad::Ref build_mbpep_loss(ad::Tape& tape, std::span<const ad::Ref> lower,
                                std::span<const ad::Ref> upper,
                                std::span<const double> ys,
                                const LossConfig& config) {
  config.validate();
  detail::check_bounds(lower, upper, ys);
  const ad::Ref mpiw = build_mpiw(tape, lower, upper);
  const ad::Ref picp = build_picp_soft(tape, lower, upper, ys, config.soften);
  return mpiw + ad::max(tape.constant(config.pc) - picp, 0.0) * config.lambda;
}

// Asymmetric quantile loss for one prediction.
inline ad::Ref build_pinball_loss(ad::Tape& tape, ad::Ref quantile_pred,
                                  double y, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("pinball_loss: tau must be in (0,1)");
  const ad::Ref diff = tape.constant(y) - quantile_pred;
  return ad::max(diff * tau, diff * (tau - 1.0));
}

// QR baseline objective: the two heads are trained as the (1-Pc)/2 and
// 1-(1-Pc)/2 quantiles, averaged over the batch.
inline ad::Ref build_quantile_loss(ad::Tape& tape,
                                   std::span<const ad::Ref> lower,
                                   std::span<const ad::Ref> upper,
                                   std::span<const double> ys,
                                   const LossConfig& config) {
  config.validate();
  detail::check_bounds(lower, upper, ys);
  const double tau_lo = (1.0 - config.pc) / 2.0;
  const double tau_hi = 1.0 - tau_lo;
  std::vector<ad::Ref> terms(lower.size());
  for (std::size_t i = 0; i < lower.size(); ++i)
    terms[i] = build_pinball_loss(tape, lower[i], ys[i], tau_lo) +
               build_pinball_loss(tape, upper[i], ys[i], tau_hi);
  return ad::mean(terms);
}

// ---------------------------------------------------------------------------
// Value-level operations. Thin wrappers that stage the same computation on a
// scratch tape with the bounds as leaves, so there is a single source of
// truth for each formula.

namespace detail {

struct ScratchBounds {
  ad::Tape tape;
  std::vector<ad::Ref> lower, upper;
};

inline void stage(ScratchBounds& s, std::span<const Interval> intervals) {
  s.lower.reserve(intervals.size());
  s.upper.reserve(intervals.size());
  for (const Interval& iv : intervals) {
    s.lower.push_back(s.tape.leaf(iv.lower));
    s.upper.push_back(s.tape.leaf(iv.upper));
  }
}

}  // namespace detail

inline double soft_coverage(const Interval& iv, double y, double s) {
  if (!(s > 0.0)) throw std::invalid_argument("soft_coverage: s must be > 0");
  return ad::Tape::sigmoid_value(s * (iv.upper - y)) *
         ad::Tape::sigmoid_value(s * (y - iv.lower));
}

inline double picp_soft(std::span<const Interval> intervals,
                        std::span<const double> ys, double s) {
  if (intervals.empty()) throw std::invalid_argument("picp_soft: empty batch");
  if (intervals.size() != ys.size())
    throw std::invalid_argument("picp_soft: mismatched sizes");
  double acc = 0.0;
  for (std::size_t i = 0; i < intervals.size(); ++i)
    acc += soft_coverage(intervals[i], ys[i], s);
  return acc / static_cast<double>(intervals.size());
}

// Raw mean width; may be negative when intervals cross. Floored only inside
// the uncertainty term of the hybrid loss, never here.
inline double mpiw(std::span<const Interval> intervals) {
  if (intervals.empty()) throw std::invalid_argument("mpiw: empty batch");
  double acc = 0.0;
  for (const Interval& iv : intervals) acc += width(iv);
  return acc / static_cast<double>(intervals.size());
}

inline double mse_midpoint(std::span<const Interval> intervals,
                           std::span<const double> ys) {
  if (intervals.empty())
    throw std::invalid_argument("mse_midpoint: empty batch");
  if (intervals.size() != ys.size())
    throw std::invalid_argument("mse_midpoint: mismatched sizes");
  double acc = 0.0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const double e = ys[i] - midpoint(intervals[i]);
    acc += e * e;
  }
  return acc / static_cast<double>(intervals.size());
}

// (n/2)[MSE/M + log M] with M = max(MPIW, floor).
inline double loss_ue(std::span<const Interval> intervals,
                      std::span<const double> ys, double floor = 1e-6) {
  if (!(floor > 0.0)) throw std::invalid_argument("loss_ue: floor must be > 0");
  const double n = static_cast<double>(intervals.size());
  const double m = std::max(mpiw(intervals), floor);
  return (n / 2.0) * (mse_midpoint(intervals, ys) / m + std::log(m));
}

// max(0, Pc - PICP)^2: zero on [Pc, 1], quadratic penalty below.
inline double loss_pi(double picp, double pc) {
  const double deficit = pc - picp;
  return deficit > 0.0 ? deficit * deficit : 0.0;
}

inline LossBreakdown hybrid_loss(std::span<const Interval> intervals,
                                 std::span<const double> ys,
                                 const LossConfig& config) {
  detail::ScratchBounds s;
  detail::stage(s, intervals);
  const HybridTerms t =
      build_hybrid_loss(s.tape, s.lower, s.upper, ys, config);
  return read_breakdown(s.tape, t);
}

inline double lube_loss(std::span<const Interval> intervals,
                        std::span<const double> ys, const LossConfig& config,
                        double target_range) {
  detail::ScratchBounds s;
  detail::stage(s, intervals);
  return s.tape.value(
      build_lube_loss(s.tape, s.lower, s.upper, ys, config, target_range));
}

inline double mbpep_loss(std::span<const Interval> intervals,
                         std::span<const double> ys,
                         const LossConfig& config) {
  detail::ScratchBounds s;
  detail::stage(s, intervals);
  return s.tape.value(build_mbpep_loss(s.tape, s.lower, s.upper, ys, config));
}

inline double pinball_loss(double quantile_pred, double y, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("pinball_loss: tau must be in (0,1)");
  const double diff = y - quantile_pred;
  return diff >= 0.0 ? tau * diff : (tau - 1.0) * diff;
}

inline double quantile_loss(std::span<const Interval> intervals,
                            std::span<const double> ys,
                            const LossConfig& config) {
  detail::ScratchBounds s;
  detail::stage(s, intervals);
  return s.tape.value(
      build_quantile_loss(s.tape, s.lower, s.upper, ys, config));
}

}  // namespace ubpi
