#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ubpi/rng.hpp"

namespace ubpi {

// Feature matrix plus target vector; the unit of loss evaluation.
struct Batch {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> features;  // n x d, row-major
  std::vector<double> targets;   // n

  double feature(std::size_t i, std::size_t j) const {
    return features[i * d + j];
  }
  double& feature(std::size_t i, std::size_t j) { return features[i * d + j]; }
};

// y = 2cos(0.2x) + 0.2cos(10x) + 0.7cos(20x) + noise, x uniform on the range.
// The noise is N(0, 0.1) read as a variance by default; noise_is_stddev reads
// the 0.1 as a standard deviation instead.
inline Batch toy_wave(std::size_t n, std::uint64_t seed, double x_lo = -5.0,
                      double x_hi = 5.0, bool noise_is_stddev = false) {
  if (n < 1) throw std::invalid_argument("toy_wave: n must be >= 1");
  if (!(x_lo < x_hi)) throw std::invalid_argument("toy_wave: empty x range");
  const double noise_std = noise_is_stddev ? 0.1 : std::sqrt(0.1);
  Rng rng(seed);
  Batch b;
  b.n = n;
  b.d = 1;
  b.features.resize(n);
  b.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(x_lo, x_hi);
    b.features[i] = x;
    b.targets[i] = 2.0 * std::cos(0.2 * x) + 0.2 * std::cos(10.0 * x) +
                   0.7 * std::cos(20.0 * x) + noise_std * rng.normal();
  }
  return b;
}

// y = 1.5 sin(x) + noise with noise ~ N(0, x^2), i.e. stddev |x|. An optional
// gap excludes a sub-range of x to create a sparse-data region.
inline Batch toy_heteroscedastic(
    std::size_t n, std::uint64_t seed, double x_lo = -5.0, double x_hi = 5.0,
    std::optional<std::pair<double, double>> gap = std::nullopt) {
  if (n < 1) throw std::invalid_argument("toy_heteroscedastic: n must be >= 1");
  if (!(x_lo < x_hi))
    throw std::invalid_argument("toy_heteroscedastic: empty x range");
  if (gap && gap->first <= x_lo && gap->second >= x_hi)
    throw std::invalid_argument(
        "toy_heteroscedastic: gap covers the whole x range");
  Rng rng(seed);
  Batch b;
  b.n = n;
  b.d = 1;
  b.features.resize(n);
  b.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = rng.uniform(x_lo, x_hi);
    while (gap && x >= gap->first && x <= gap->second)
      x = rng.uniform(x_lo, x_hi);
    b.features[i] = x;
    b.targets[i] = 1.5 * std::sin(x) + std::abs(x) * rng.normal();
  }
  return b;
}

// Dataset profile: target column (name or index), the large-dataset flag that
// selects the wider hidden layer, and columns to drop before training.
struct DatasetProfile {
  std::string target;
  bool large = false;
  std::vector<std::string> drop;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split_fields(const std::string& line,
                                             char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

inline bool parse_index(const std::string& s, std::size_t& out) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  out = static_cast<std::size_t>(std::strtoull(s.c_str(), nullptr, 10));
  return true;
}

}  // namespace detail

inline DatasetProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile file: " + path);
  DatasetProfile profile;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (key == "target") {
      profile.target = value;
    } else if (key == "large") {
      if (value == "true" || value == "1")
        profile.large = true;
      else if (value == "false" || value == "0")
        profile.large = false;
      else
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": large must be true or false");
    } else if (key == "drop") {
      for (const std::string& col : detail::split_fields(value, ','))
        if (!col.empty()) profile.drop.push_back(col);
    } else {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": unknown profile key '" + key + "'");
    }
  }
  if (profile.target.empty())
    throw std::runtime_error(path + ": profile names no target column");
  return profile;
}

// Comma-separated numeric CSV with an optional single header row. Column
// references (target, drop) accept a header name or a 0-based index. Any
// malformed cell is an error naming its row and column; rows are kept in
// file order.
inline Batch load_csv(const std::string& path, const DatasetProfile& profile) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    rows.push_back(detail::split_fields(line, ','));
  }
  if (rows.empty()) throw std::runtime_error(path + ": file has no rows");

  // A first row with any non-numeric cell is a header.
  bool has_header = false;
  for (const std::string& cell : rows.front()) {
    double ignored;
    if (!detail::parse_double(cell, ignored)) {
      has_header = true;
      break;
    }
  }

  const std::size_t columns = rows.front().size();
  std::vector<std::string> names(columns);
  for (std::size_t j = 0; j < columns; ++j)
    names[j] = has_header ? rows.front()[j] : std::to_string(j);

  auto resolve = [&](const std::string& ref) -> std::size_t {
    for (std::size_t j = 0; j < columns; ++j)
      if (names[j] == ref) return j;
    std::size_t idx;
    if (detail::parse_index(ref, idx) && idx < columns) return idx;
    throw std::runtime_error(path + ": no column named '" + ref + "'");
  };

  const std::size_t target = resolve(profile.target);
  std::vector<bool> keep(columns, true);
  keep[target] = false;
  for (const std::string& col : profile.drop) keep[resolve(col)] = false;

  std::size_t d = 0;
  for (std::size_t j = 0; j < columns; ++j)
    if (keep[j]) ++d;
  if (d == 0) throw std::runtime_error(path + ": no feature columns left");

  const std::size_t first_data = has_header ? 1 : 0;
  if (rows.size() == first_data)
    throw std::runtime_error(path + ": file has no data rows");

  Batch b;
  b.n = rows.size() - first_data;
  b.d = d;
  b.features.reserve(b.n * d);
  b.targets.reserve(b.n);
  for (std::size_t r = first_data; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = path + ": row " + std::to_string(r + 1);
    if (row.size() != columns)
      throw std::runtime_error(where + " has " + std::to_string(row.size()) +
                               " cells, expected " + std::to_string(columns));
    for (std::size_t j = 0; j < columns; ++j) {
      if (!keep[j] && j != target) continue;
      double v;
      if (!detail::parse_double(row[j], v))
        throw std::runtime_error(where + ", column '" + names[j] +
                                 "': cannot parse '" + row[j] +
                                 "' as a finite number");
      if (j == target)
        b.targets.push_back(v);
      else
        b.features.push_back(v);
    }
  }
  return b;
}

// Random disjoint, exhaustive partition; deterministic per seed.
inline std::pair<Batch, Batch> split(const Batch& batch, double train_fraction,
                                     std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("split: train_fraction must be in (0,1)");
  if (batch.n < 2) throw std::invalid_argument("split: need at least 2 rows");
  const auto perm = Rng(seed).permutation(batch.n);
  std::size_t n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(batch.n)));
  n_train = std::clamp<std::size_t>(n_train, 1, batch.n - 1);

  auto take = [&](std::size_t begin, std::size_t end) {
    Batch out;
    out.n = end - begin;
    out.d = batch.d;
    out.features.reserve(out.n * batch.d);
    out.targets.reserve(out.n);
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t i = perm[k];
      out.features.insert(out.features.end(),
                          batch.features.begin() + i * batch.d,
                          batch.features.begin() + (i + 1) * batch.d);
      out.targets.push_back(batch.targets[i]);
    }
    return out;
  };
  return {take(0, n_train), take(n_train, batch.n)};
}

// Per-feature and target zero-mean/unit-variance transform, fitted on the
// training split only.
class Standardizer {
 public:
  static Standardizer fit(const Batch& train) {
    if (train.n < 1)
      throw std::invalid_argument("Standardizer: empty training batch");
    Standardizer s;
    s.feature_mean_.assign(train.d, 0.0);
    s.feature_std_.assign(train.d, 0.0);
    for (std::size_t i = 0; i < train.n; ++i)
      for (std::size_t j = 0; j < train.d; ++j)
        s.feature_mean_[j] += train.feature(i, j);
    for (double& m : s.feature_mean_) m /= static_cast<double>(train.n);
    for (std::size_t i = 0; i < train.n; ++i)
      for (std::size_t j = 0; j < train.d; ++j) {
        const double c = train.feature(i, j) - s.feature_mean_[j];
        s.feature_std_[j] += c * c;
      }
    for (std::size_t j = 0; j < train.d; ++j) {
      s.feature_std_[j] =
          std::sqrt(s.feature_std_[j] / static_cast<double>(train.n));
      if (s.feature_std_[j] < kMinStd)
        throw std::runtime_error("Standardizer: feature column " +
                                 std::to_string(j) +
                                 " is constant; drop it via the profile");
    }
    s.target_mean_ = 0.0;
    for (double y : train.targets) s.target_mean_ += y;
    s.target_mean_ /= static_cast<double>(train.n);
    s.target_std_ = 0.0;
    for (double y : train.targets) {
      const double c = y - s.target_mean_;
      s.target_std_ += c * c;
    }
    s.target_std_ = std::sqrt(s.target_std_ / static_cast<double>(train.n));
    if (s.target_std_ < kMinStd)
      throw std::runtime_error("Standardizer: target column is constant");
    return s;
  }

  Batch apply(const Batch& batch) const {
    if (batch.d != feature_mean_.size())
      throw std::invalid_argument("Standardizer: feature dimension mismatch");
    Batch out = batch;
    for (std::size_t i = 0; i < out.n; ++i)
      for (std::size_t j = 0; j < out.d; ++j)
        out.feature(i, j) =
            (out.feature(i, j) - feature_mean_[j]) / feature_std_[j];
    for (double& y : out.targets) y = (y - target_mean_) / target_std_;
    return out;
  }

  double apply_feature(std::size_t j, double x) const {
    return (x - feature_mean_[j]) / feature_std_[j];
  }
  double apply_target(double y) const {
    return (y - target_mean_) / target_std_;
  }
  double invert_target(double y) const { return y * target_std_ + target_mean_; }

  double target_mean() const { return target_mean_; }
  double target_std() const { return target_std_; }
  std::size_t dimension() const { return feature_mean_.size(); }
  const std::vector<double>& feature_means() const { return feature_mean_; }
  const std::vector<double>& feature_stds() const { return feature_std_; }

  // Identity transform of a given width (used when data is already scaled).
  static Standardizer identity(std::size_t d) {
    Standardizer s;
    s.feature_mean_.assign(d, 0.0);
    s.feature_std_.assign(d, 1.0);
    s.target_mean_ = 0.0;
    s.target_std_ = 1.0;
    return s;
  }

  static Standardizer from_parts(std::vector<double> feature_mean,
                                 std::vector<double> feature_std,
                                 double target_mean, double target_std) {
    if (feature_mean.size() != feature_std.size())
      throw std::invalid_argument("Standardizer: mismatched mean/std sizes");
    Standardizer s;
    s.feature_mean_ = std::move(feature_mean);
    s.feature_std_ = std::move(feature_std);
    s.target_mean_ = target_mean;
    s.target_std_ = target_std;
    return s;
  }

 private:
  static constexpr double kMinStd = 1e-12;

  std::vector<double> feature_mean_;
  std::vector<double> feature_std_;
  double target_mean_ = 0.0;
  double target_std_ = 1.0;
};

}  // namespace ubpi
