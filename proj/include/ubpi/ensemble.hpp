#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ubpi/data.hpp"
#include "ubpi/metrics.hpp"
#include "ubpi/model.hpp"
#include "ubpi/trainer.hpp"

namespace ubpi {

// Per-sample aggregate of the member bounds: means, cross-member variances
// (the epistemic-uncertainty estimate), and the final widened interval.
struct EnsembleAggregate {
  double mu_lower = 0.0;
  double mu_upper = 0.0;
  double var_lower = 0.0;
  double var_upper = 0.0;
  Interval final_interval;
};

struct AggregateOptions {
  // The source formulas add the raw variance to the mean bounds despite the
  // unit mismatch; this flag switches the widening to standard deviation.
  bool widen_with_std = false;
};

// Means over members, unbiased 1/(m-1) variances (0 for a single member),
// final bounds mean -/+ the widening term.
inline std::vector<EnsembleAggregate> aggregate(
    std::span<const std::vector<Interval>> member_intervals,
    AggregateOptions options = {}) {
  const std::size_t m = member_intervals.size();
  if (m < 1) throw std::invalid_argument("aggregate: need at least 1 member");
  const std::size_t n = member_intervals.front().size();
  for (const auto& member : member_intervals)
    if (member.size() != n)
      throw std::invalid_argument("aggregate: ragged member outputs");

  std::vector<EnsembleAggregate> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    EnsembleAggregate& a = out[i];
    for (std::size_t j = 0; j < m; ++j) {
      a.mu_lower += member_intervals[j][i].lower;
      a.mu_upper += member_intervals[j][i].upper;
    }
    a.mu_lower /= static_cast<double>(m);
    a.mu_upper /= static_cast<double>(m);
    if (m > 1) {
      for (std::size_t j = 0; j < m; ++j) {
        const double dl = member_intervals[j][i].lower - a.mu_lower;
        const double du = member_intervals[j][i].upper - a.mu_upper;
        a.var_lower += dl * dl;
        a.var_upper += du * du;
      }
      a.var_lower /= static_cast<double>(m - 1);
      a.var_upper /= static_cast<double>(m - 1);
    }
    const double widen_lower =
        options.widen_with_std ? std::sqrt(a.var_lower) : a.var_lower;
    const double widen_upper =
        options.widen_with_std ? std::sqrt(a.var_upper) : a.var_upper;
    a.final_interval =
        Interval{a.mu_lower - widen_lower, a.mu_upper + widen_upper};
  }
  return out;
}

inline std::vector<Interval> final_intervals(
    std::span<const EnsembleAggregate> aggregates) {
  std::vector<Interval> out(aggregates.size());
  for (std::size_t i = 0; i < aggregates.size(); ++i)
    out[i] = aggregates[i].final_interval;
  return out;
}

struct EnsembleTrainResult {
  std::vector<NetworkParams> members;
  std::vector<TrainTrace> traces;
  std::vector<std::uint64_t> seeds;
};

inline std::vector<std::uint64_t> member_seeds(std::uint64_t base_seed,
                                               std::size_t m) {
  std::vector<std::uint64_t> seeds(m);
  for (std::size_t j = 0; j < m; ++j) seeds[j] = base_seed + j;
  return seeds;
}

// Trains one member per seed on the full training split (initialization
// diversity only, no bagging). Members run concurrently; each owns its
// parameters, tape, and random stream, so the result does not depend on the
// thread schedule.
inline EnsembleTrainResult train_ensemble(const Batch& train_split,
                                          const TrainConfig& base_config,
                                          std::span<const std::uint64_t> seeds,
                                          int hidden = 50) {
  const std::size_t m = seeds.size();
  if (m < 1)
    throw std::invalid_argument("train_ensemble: need at least 1 member");

  EnsembleTrainResult result;
  result.members.resize(m);
  result.traces.resize(m);
  result.seeds.assign(seeds.begin(), seeds.end());

  std::vector<std::string> errors(m);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t j = next.fetch_add(1); j < m; j = next.fetch_add(1)) {
      try {
        TrainConfig config = base_config;
        config.seed = seeds[j];
        result.members[j] = init_network(static_cast<int>(train_split.d),
                                         hidden, seeds[j]);
        result.traces[j] = train(result.members[j], train_split, config);
      } catch (const std::exception& e) {
        errors[j] = e.what();
      }
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(m, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  for (std::size_t j = 0; j < m; ++j)
    if (!errors[j].empty())
      throw std::runtime_error("ensemble member " + std::to_string(j) + ": " +
                               errors[j]);
  return result;
}

inline std::vector<EnsembleAggregate> predict_ensemble(
    std::span<const NetworkParams> members, const Batch& batch,
    AggregateOptions options = {}) {
  if (members.empty())
    throw std::invalid_argument("predict_ensemble: no members");
  std::vector<std::vector<Interval>> member_intervals(members.size());
  for (std::size_t j = 0; j < members.size(); ++j)
    member_intervals[j] = predict(members[j], batch);
  return aggregate(member_intervals, options);
}

// ---------------------------------------------------------------------------
// Snapshot directory: manifest.txt plus one self-contained model file per
// member.

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

inline std::string config_echo(const TrainConfig& config) {
  std::ostringstream out;
  out << "loss " << to_string(config.loss) << '\n'
      << "pc " << detail::format_double(config.loss_config.pc) << '\n'
      << "lambda " << detail::format_double(config.loss_config.lambda) << '\n'
      << "soften " << detail::format_double(config.loss_config.soften) << '\n'
      << "mpiw_floor " << detail::format_double(config.loss_config.mpiw_floor) << '\n'
      << "batch_size " << config.batch_size << '\n'
      << "epochs " << config.epochs << '\n'
      << "learning_rate " << detail::format_double(config.learning_rate) << '\n'
      << "optimizer " << to_string(config.optimizer) << '\n'
      << "seed " << config.seed << '\n'
      << "clip_norm " << detail::format_double(config.clip_norm) << '\n'
      << "target_range " << detail::format_double(config.target_range) << '\n';
  return out.str();
}

struct SnapshotExtras {
  std::uint64_t split_seed = 0;
  double split_fraction = 0.9;
};

inline void save_ensemble(const std::filesystem::path& dir,
                          const EnsembleTrainResult& ensemble,
                          const Standardizer& scaler,
                          const TrainConfig& config,
                          const SnapshotExtras& extras = {}) {
  std::filesystem::create_directories(dir);
  const std::string echo = config_echo(config);
  {
    std::ofstream out(dir / "manifest.txt");
    if (!out)
      throw std::runtime_error("cannot write manifest in " + dir.string());
    out << "ubpi-ensemble 1\n";
    out << "members " << ensemble.members.size() << '\n';
    out << "seeds";
    for (std::uint64_t s : ensemble.seeds) out << ' ' << s;
    out << '\n';
    out << "config_hash " << detail::fnv1a64(echo) << '\n';
    out << "split_seed " << extras.split_seed << '\n';
    out << "split_fraction " << detail::format_double(extras.split_fraction) << '\n';
    out << echo;
  }
  for (std::size_t j = 0; j < ensemble.members.size(); ++j) {
    const auto path = dir / ("member_" + std::to_string(j) + ".txt");
    save_model(path.string(), ensemble.members[j], scaler);
  }
}

struct EnsembleSnapshot {
  std::vector<NetworkParams> members;
  Standardizer scaler = Standardizer::identity(0);
  std::vector<std::uint64_t> seeds;
  std::uint64_t config_hash = 0;
  std::uint64_t split_seed = 0;
  double split_fraction = 0.9;
};

inline EnsembleSnapshot load_ensemble(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in)
    throw std::runtime_error("cannot open manifest in " + dir.string());
  std::string magic;
  int version = 0;
  std::size_t m = 0;
  std::string key;
  if (!(in >> magic >> version) || magic != "ubpi-ensemble" || version != 1)
    throw std::runtime_error(dir.string() + ": not a ubpi-ensemble v1 dir");
  if (!(in >> key >> m) || key != "members" || m < 1)
    throw std::runtime_error(dir.string() + ": bad member count");
  EnsembleSnapshot snap;
  if (!(in >> key) || key != "seeds")
    throw std::runtime_error(dir.string() + ": expected seeds");
  snap.seeds.resize(m);
  for (std::uint64_t& s : snap.seeds)
    if (!(in >> s)) throw std::runtime_error(dir.string() + ": bad seeds");
  if (!(in >> key >> snap.config_hash) || key != "config_hash")
    throw std::runtime_error(dir.string() + ": expected config_hash");
  if (!(in >> key >> snap.split_seed) || key != "split_seed")
    throw std::runtime_error(dir.string() + ": expected split_seed");
  if (!(in >> key >> snap.split_fraction) || key != "split_fraction")
    throw std::runtime_error(dir.string() + ": expected split_fraction");

  snap.members.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto path = dir / ("member_" + std::to_string(j) + ".txt");
    auto [net, scaler] = load_model(path.string());
    if (j == 0) snap.scaler = scaler;
    snap.members.push_back(std::move(net));
  }
  return snap;
}

// ---------------------------------------------------------------------------
// Lambda sweep: one full ensemble train/eval per lambda with the same member
// seeds, results in the given lambda order.

struct SweepRow {
  double lambda = 0.0;
  EvalReport report;
};

inline std::vector<SweepRow> sweep_lambda(const Batch& train_split,
                                          const Batch& eval_split,
                                          const TrainConfig& base_config,
                                          std::span<const double> lambdas,
                                          std::size_t m, int hidden = 50,
                                          double target_std = 1.0) {
  if (lambdas.size() < 2)
    throw std::invalid_argument("sweep_lambda: need at least 2 lambda values");
  const auto seeds = member_seeds(base_config.seed, m);
  std::vector<SweepRow> rows;
  rows.reserve(lambdas.size());
  for (double lambda : lambdas) {
    TrainConfig config = base_config;
    config.loss_config.lambda = lambda;
    const auto ensemble = train_ensemble(train_split, config, seeds, hidden);
    const auto aggregates = predict_ensemble(ensemble.members, eval_split);
    const auto intervals = final_intervals(aggregates);
    rows.push_back(SweepRow{
        lambda, evaluate(intervals, eval_split.targets, target_std)});
  }
  return rows;
}

}  // namespace ubpi
