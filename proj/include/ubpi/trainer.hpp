#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ubpi/autodiff.hpp"
#include "ubpi/data.hpp"
#include "ubpi/losses.hpp"
#include "ubpi/metrics.hpp"
#include "ubpi/model.hpp"

namespace ubpi {

enum class LossKind { ubpi, lube, mbpep, pinball };

enum class OptimizerKind { sgd, adam };

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::ubpi: return "ubpi";
    case LossKind::lube: return "lube";
    case LossKind::mbpep: return "mbpep";
    case LossKind::pinball: return "pinball";
  }
  return "?";
}

inline const char* to_string(OptimizerKind k) {
  return k == OptimizerKind::sgd ? "sgd" : "adam";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "ubpi") return LossKind::ubpi;
  if (s == "lube") return LossKind::lube;
  if (s == "mbpep") return LossKind::mbpep;
  if (s == "pinball") return LossKind::pinball;
  throw std::invalid_argument("unknown loss kind '" + s + "'");
}

struct TrainConfig {
  LossKind loss = LossKind::ubpi;
  LossConfig loss_config;
  std::size_t batch_size = 100;
  std::size_t epochs = 800;
  double learning_rate = 1e-2;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
  double clip_norm = 10.0;
  // Target range r of the LUBE loss; <= 0 derives it from the training
  // targets at train start.
  double target_range = 0.0;

  void validate(std::size_t n_train) const {
    loss_config.validate();
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (!(learning_rate > 0.0))
      throw std::invalid_argument("train: learning rate must be > 0");
    if (batch_size < 1 || batch_size > n_train)
      throw std::invalid_argument(
          "train: batch size must be in [1, n_train]");
    if (!(clip_norm > 0.0))
      throw std::invalid_argument("train: clip norm must be > 0");
  }
};

// Raised when the loss stops being finite; carries where it happened.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t epoch, std::size_t step, const std::string& what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step) + ": " + what),
        epoch_(epoch),
        step_(step) {}

  std::size_t epoch() const { return epoch_; }
  std::size_t step() const { return step_; }

 private:
  std::size_t epoch_;
  std::size_t step_;
};

struct EpochStats {
  LossBreakdown loss;   // averaged over the epoch's mini-batches
  double picp_hard = 0.0;
  double mpiw_hard = 0.0;
  double crossing_rate = 0.0;
};

struct TrainTrace {
  std::vector<EpochStats> epochs;

  static std::string csv_header() {
    return "epoch,total,l_ue,l_pi,mse,mpiw_soft,picp_soft,picp_hard,mpiw_hard,"
           "crossing_rate";
  }

  void write_csv(std::ostream& out) const {
    out << csv_header() << '\n';
    char buf[320];
    for (std::size_t e = 0; e < epochs.size(); ++e) {
      const EpochStats& s = epochs[e];
      std::snprintf(buf, sizeof(buf),
                    "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                    e, s.loss.total, s.loss.l_ue, s.loss.l_pi, s.loss.mse,
                    s.loss.mpiw, s.loss.picp_soft, s.picp_hard, s.mpiw_hard,
                    s.crossing_rate);
      out << buf << '\n';
    }
  }
};

namespace detail {

struct AdamState {
  std::vector<double> m, v;
  std::size_t t = 0;
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;
};

// Scales the gradient down to the clip norm; direction is never changed.
inline void clip_gradient(std::vector<double>& grad, double clip_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (double& g : grad) g *= scale;
  }
}

}  // namespace detail

// Mini-batch gradient training of one network on the configured loss.
// The dataset is expected to be standardized. Deterministic per seed: the
// shuffle stream is fixed and members of an ensemble never share state.
inline TrainTrace train(NetworkParams& net, const Batch& train_split,
                        const TrainConfig& config) {
  config.validate(train_split.n);
  if (train_split.d != static_cast<std::size_t>(net.input_dim))
    throw std::invalid_argument("train: feature dimension mismatch");

  double target_range = config.target_range;
  if (config.loss == LossKind::lube && target_range <= 0.0) {
    const auto [lo, hi] = std::minmax_element(train_split.targets.begin(),
                                              train_split.targets.end());
    target_range = *hi - *lo;
    if (!(target_range > 0.0))
      throw std::invalid_argument("train: degenerate target range for lube");
  }

  const std::size_t param_count = net.count();
  std::vector<double> grad(param_count);
  detail::AdamState adam;
  if (config.optimizer == OptimizerKind::adam) {
    adam.m.assign(param_count, 0.0);
    adam.v.assign(param_count, 0.0);
  }

  Rng shuffle_rng(config.seed);
  ad::Tape tape;
  TrainTrace trace;
  trace.epochs.reserve(config.epochs);
  std::vector<std::size_t> rows;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto perm = shuffle_rng.permutation(train_split.n);
    LossBreakdown epoch_loss;
    std::size_t steps = 0;

    for (std::size_t offset = 0; offset < train_split.n;
         offset += config.batch_size) {
      const std::size_t count =
          std::min(config.batch_size, train_split.n - offset);
      rows.assign(perm.begin() + offset, perm.begin() + offset + count);

      tape.clear();
      const TapeForward fwd = forward_on_tape(tape, net, train_split, rows);
      std::vector<double> ys(count);
      for (std::size_t k = 0; k < count; ++k)
        ys[k] = train_split.targets[rows[k]];

      LossBreakdown step_loss;
      ad::Ref total;
      switch (config.loss) {
        case LossKind::ubpi: {
          const HybridTerms terms = build_hybrid_loss(
              tape, fwd.lower, fwd.upper, ys, config.loss_config);
          step_loss = read_breakdown(tape, terms);
          total = terms.total;
          break;
        }
        case LossKind::lube:
          total = build_lube_loss(tape, fwd.lower, fwd.upper, ys,
                                  config.loss_config, target_range);
          break;
        case LossKind::mbpep:
          total = build_mbpep_loss(tape, fwd.lower, fwd.upper, ys,
                                   config.loss_config);
          break;
        case LossKind::pinball:
          total = build_quantile_loss(tape, fwd.lower, fwd.upper, ys,
                                      config.loss_config);
          break;
      }
      if (config.loss != LossKind::ubpi) {
        step_loss.total = tape.value(total);
        std::vector<Interval> ivs(count);
        for (std::size_t k = 0; k < count; ++k)
          ivs[k] = {tape.value(fwd.lower[k]), tape.value(fwd.upper[k])};
        step_loss.mse = mse_midpoint(ivs, ys);
        step_loss.mpiw = mpiw(ivs);
        step_loss.picp_soft = picp_soft(ivs, ys, config.loss_config.soften);
      }
      if (!std::isfinite(step_loss.total))
        throw TrainingError(epoch, steps, "loss is not finite");

      tape.backward(total);
      for (std::size_t p = 0; p < param_count; ++p)
        grad[p] = tape.gradient(fwd.params[p]);
      detail::clip_gradient(grad, config.clip_norm);

      std::size_t p = 0;
      if (config.optimizer == OptimizerKind::adam) {
        ++adam.t;
        const double bc1 =
            1.0 - std::pow(detail::AdamState::beta1,
                           static_cast<double>(adam.t));
        const double bc2 =
            1.0 - std::pow(detail::AdamState::beta2,
                           static_cast<double>(adam.t));
        net.for_each([&](double& w) {
          adam.m[p] = detail::AdamState::beta1 * adam.m[p] +
                      (1.0 - detail::AdamState::beta1) * grad[p];
          adam.v[p] = detail::AdamState::beta2 * adam.v[p] +
                      (1.0 - detail::AdamState::beta2) * grad[p] * grad[p];
          const double mhat = adam.m[p] / bc1;
          const double vhat = adam.v[p] / bc2;
          w -= config.learning_rate * mhat /
               (std::sqrt(vhat) + detail::AdamState::eps);
          ++p;
        });
      } else {
        net.for_each([&](double& w) {
          w -= config.learning_rate * grad[p];
          ++p;
        });
      }
      if (!net.finite())
        throw TrainingError(epoch, steps, "parameters are not finite");

      epoch_loss.total += step_loss.total;
      epoch_loss.l_ue += step_loss.l_ue;
      epoch_loss.l_pi += step_loss.l_pi;
      epoch_loss.mse += step_loss.mse;
      epoch_loss.mpiw += step_loss.mpiw;
      epoch_loss.picp_soft += step_loss.picp_soft;
      ++steps;
    }

    const double inv = 1.0 / static_cast<double>(steps);
    epoch_loss.total *= inv;
    epoch_loss.l_ue *= inv;
    epoch_loss.l_pi *= inv;
    epoch_loss.mse *= inv;
    epoch_loss.mpiw *= inv;
    epoch_loss.picp_soft *= inv;

    const auto intervals = predict(net, train_split);
    EpochStats stats;
    stats.loss = epoch_loss;
    stats.picp_hard = picp_hard(intervals, train_split.targets);
    stats.mpiw_hard = mpiw(intervals);
    stats.crossing_rate = crossing_rate(intervals);
    trace.epochs.push_back(stats);
  }
  return trace;
}

}  // namespace ubpi
