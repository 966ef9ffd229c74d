#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ubpi/autodiff.hpp"
#include "ubpi/data.hpp"
#include "ubpi/rng.hpp"

namespace ubpi {

// A (lower, upper) bound pair for one sample, in standardized target units.
// Ordering is not structurally enforced; crossed intervals are monitored by
// the metrics and floored only inside the width-based loss term.
struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

inline double midpoint(const Interval& iv) {
  return 0.5 * (iv.lower + iv.upper);
}

inline double width(const Interval& iv) { return iv.upper - iv.lower; }

// Output biases start at -/+ this offset so intervals begin wide and shrink
// during training instead of opening from the degenerate zero-width basin.
inline constexpr double kOutputBiasOffset = 2.5;

// Two-head feedforward network: input -> hidden (ReLU) -> (lower, upper).
struct NetworkParams {
  int input_dim = 0;
  int hidden = 0;
  std::vector<double> w1;  // input_dim x hidden, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden x 2, row-major
  std::vector<double> b2;  // 2

  std::size_t count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }

  // Canonical flat order: w1, b1, w2, b2. Optimizers and the tape forward
  // pass both rely on it.
  template <class F>
  void for_each(F&& f) {
    for (auto* block : {&w1, &b1, &w2, &b2})
      for (double& v : *block) f(v);
  }
  template <class F>
  void for_each(F&& f) const {
    for (auto* block : {&w1, &b1, &w2, &b2})
      for (const double& v : *block) f(v);
  }

  bool finite() const {
    bool ok = true;
    for_each([&](double v) { ok = ok && std::isfinite(v); });
    return ok;
  }

  bool operator==(const NetworkParams&) const = default;
};

// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero hidden biases, and output
// biases offset to (-kOutputBiasOffset, +kOutputBiasOffset). Deterministic
// per seed.
inline NetworkParams init_network(int input_dim, int hidden,
                                  std::uint64_t seed) {
  if (input_dim < 1 || hidden < 1)
    throw std::invalid_argument("init_network: dimensions must be >= 1");
  NetworkParams net;
  net.input_dim = input_dim;
  net.hidden = hidden;
  net.w1.resize(static_cast<std::size_t>(input_dim) * hidden);
  net.b1.assign(static_cast<std::size_t>(hidden), 0.0);
  net.w2.resize(static_cast<std::size_t>(hidden) * 2);
  net.b2 = {-kOutputBiasOffset, +kOutputBiasOffset};

  Rng rng(seed);
  const double limit1 = std::sqrt(6.0 / (input_dim + hidden));
  for (double& w : net.w1) w = rng.uniform(-limit1, limit1);
  const double limit2 = std::sqrt(6.0 / (hidden + 2));
  for (double& w : net.w2) w = rng.uniform(-limit2, limit2);
  return net;
}

// Pure forward pass over a batch; one interval per sample.
inline std::vector<Interval> predict(const NetworkParams& net,
                                     const Batch& batch) {
  if (batch.d != static_cast<std::size_t>(net.input_dim))
    throw std::invalid_argument(
        "predict: batch dimension " + std::to_string(batch.d) +
        " does not match input_dim " + std::to_string(net.input_dim));
  const std::size_t hidden = static_cast<std::size_t>(net.hidden);
  std::vector<Interval> out(batch.n);
  std::vector<double> h(hidden);
  for (std::size_t i = 0; i < batch.n; ++i) {
    for (std::size_t k = 0; k < hidden; ++k) {
      double acc = net.b1[k];
      for (std::size_t j = 0; j < batch.d; ++j)
        acc += batch.feature(i, j) * net.w1[j * hidden + k];
      h[k] = acc > 0.0 ? acc : 0.0;
    }
    double lower = net.b2[0];
    double upper = net.b2[1];
    for (std::size_t k = 0; k < hidden; ++k) {
      lower += h[k] * net.w2[k * 2 + 0];
      upper += h[k] * net.w2[k * 2 + 1];
    }
    out[i] = Interval{lower, upper};
  }
  return out;
}

inline Interval predict_one(const NetworkParams& net,
                            std::span<const double> x) {
  Batch b;
  b.n = 1;
  b.d = x.size();
  b.features.assign(x.begin(), x.end());
  b.targets.assign(1, 0.0);
  return predict(net, b)[0];
}

// Network forward pass recorded on a tape for the rows of one mini-batch.
// params holds the parameter leaves in the canonical flat order; lower/upper
// hold one bound node per row.
struct TapeForward {
  std::vector<ad::Ref> params;
  std::vector<ad::Ref> lower;
  std::vector<ad::Ref> upper;
};

inline TapeForward forward_on_tape(ad::Tape& tape, const NetworkParams& net,
                                   const Batch& batch,
                                   std::span<const std::size_t> rows) {
  if (batch.d != static_cast<std::size_t>(net.input_dim))
    throw std::invalid_argument("forward_on_tape: feature dimension mismatch");
  const std::size_t hidden = static_cast<std::size_t>(net.hidden);
  const std::size_t d = batch.d;

  TapeForward f;
  f.params.reserve(net.count());
  net.for_each([&](const double& v) { f.params.push_back(tape.leaf(v)); });
  const ad::Ref* w1 = f.params.data();
  const ad::Ref* b1 = w1 + net.w1.size();
  const ad::Ref* w2 = b1 + net.b1.size();
  const ad::Ref* b2 = w2 + net.w2.size();

  f.lower.reserve(rows.size());
  f.upper.reserve(rows.size());
  std::vector<ad::Ref> x(d);
  std::vector<ad::Ref> terms(d);
  std::vector<ad::Ref> h(hidden);
  std::vector<ad::Ref> head_terms(hidden);
  for (const std::size_t i : rows) {
    for (std::size_t j = 0; j < d; ++j)
      x[j] = tape.constant(batch.feature(i, j));
    for (std::size_t k = 0; k < hidden; ++k) {
      for (std::size_t j = 0; j < d; ++j) terms[j] = x[j] * w1[j * hidden + k];
      h[k] = ad::relu(ad::sum(terms) + b1[k]);
    }
    for (int head = 0; head < 2; ++head) {
      for (std::size_t k = 0; k < hidden; ++k)
        head_terms[k] = h[k] * w2[k * 2 + head];
      const ad::Ref out = ad::sum(head_terms) + b2[head];
      (head == 0 ? f.lower : f.upper).push_back(out);
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Model snapshot: plain-text key-value layout, one "<key> <count> <values>"
// line per block, doubles printed with %.17g so the file round-trips
// bit-exactly. Carries the standardization constants next to the weights.

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_block(std::ostream& out, const std::string& key,
                        std::span<const double> values) {
  out << key << ' ' << values.size();
  for (double v : values) out << ' ' << format_double(v);
  out << '\n';
}

inline std::vector<double> read_block(std::istream& in, const std::string& key,
                                      const std::string& where) {
  std::string name;
  std::size_t count = 0;
  if (!(in >> name >> count) || name != key)
    throw std::runtime_error(where + ": expected block '" + key + "'");
  std::vector<double> values(count);
  for (double& v : values)
    if (!(in >> v))
      throw std::runtime_error(where + ": truncated block '" + key + "'");
  return values;
}

}  // namespace detail

inline void save_model(std::ostream& out, const NetworkParams& net,
                       const Standardizer& scaler) {
  if (scaler.dimension() != static_cast<std::size_t>(net.input_dim))
    throw std::invalid_argument(
        "save_model: standardizer dimension does not match input_dim");
  out << "ubpi-model 1\n";
  out << "input_dim " << net.input_dim << '\n';
  out << "hidden " << net.hidden << '\n';
  detail::write_block(out, "w1", net.w1);
  detail::write_block(out, "b1", net.b1);
  detail::write_block(out, "w2", net.w2);
  detail::write_block(out, "b2", net.b2);
  detail::write_block(out, "feature_mean", scaler.feature_means());
  detail::write_block(out, "feature_std", scaler.feature_stds());
  const double tm[] = {scaler.target_mean()};
  const double ts[] = {scaler.target_std()};
  detail::write_block(out, "target_mean", tm);
  detail::write_block(out, "target_std", ts);
}

inline void save_model(const std::string& path, const NetworkParams& net,
                       const Standardizer& scaler) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  save_model(out, net, scaler);
}

inline std::pair<NetworkParams, Standardizer> load_model(std::istream& in,
                                                         const std::string&
                                                             where) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "ubpi-model" || version != 1)
    throw std::runtime_error(where + ": not a ubpi-model v1 file");
  NetworkParams net;
  std::string key;
  if (!(in >> key >> net.input_dim) || key != "input_dim")
    throw std::runtime_error(where + ": expected input_dim");
  if (!(in >> key >> net.hidden) || key != "hidden")
    throw std::runtime_error(where + ": expected hidden");
  net.w1 = detail::read_block(in, "w1", where);
  net.b1 = detail::read_block(in, "b1", where);
  net.w2 = detail::read_block(in, "w2", where);
  net.b2 = detail::read_block(in, "b2", where);
  const std::size_t d = static_cast<std::size_t>(net.input_dim);
  const std::size_t hidden = static_cast<std::size_t>(net.hidden);
  if (net.input_dim < 1 || net.hidden < 1 || net.w1.size() != d * hidden ||
      net.b1.size() != hidden || net.w2.size() != hidden * 2 ||
      net.b2.size() != 2)
    throw std::runtime_error(where + ": inconsistent layer shapes");
  auto feature_mean = detail::read_block(in, "feature_mean", where);
  auto feature_std = detail::read_block(in, "feature_std", where);
  auto target_mean = detail::read_block(in, "target_mean", where);
  auto target_std = detail::read_block(in, "target_std", where);
  if (feature_mean.size() != d || feature_std.size() != d ||
      target_mean.size() != 1 || target_std.size() != 1)
    throw std::runtime_error(where + ": inconsistent standardizer shapes");
  Standardizer scaler = Standardizer::from_parts(
      std::move(feature_mean), std::move(feature_std), target_mean[0],
      target_std[0]);
  return {std::move(net), std::move(scaler)};
}

inline std::pair<NetworkParams, Standardizer> load_model(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  return load_model(in, path);
}

}  // namespace ubpi
