// Command-line front end: train/evaluate/sweep the interval networks on toy
// generators or CSV datasets, and emit the result artifacts (reports, CSV
// tables, SVG plots, model snapshots).

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ubpi/ubpi.hpp"

namespace fs = std::filesystem;

namespace {

// Sentinels (negative / zero) mean "not set"; each command resolves its own
// documented default.
struct CommonOptions {
  double pc = 0.95;
  double lambda = -1.0;
  double soften = 0.0;
  std::size_t ensemble = 5;
  std::uint64_t seed = 1;
  std::size_t epochs = 0;
  double lr = 0.0;
  std::size_t batch = 100;
  std::string loss = "ubpi";
  std::string out_dir = "ubpi-out";
};

void add_common_flags(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--pc", opt.pc, "Confidence level P_c")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--lambda", opt.lambda,
                  "Coverage/width trade-off weight (default depends on loss)");
  cmd->add_option("--soften", opt.soften, "Soft-coverage sigmoid factor");
  cmd->add_option("--ensemble", opt.ensemble, "Number of ensemble members");
  cmd->add_option("--seed", opt.seed, "Base random seed");
  cmd->add_option("--epochs", opt.epochs, "Training epochs");
  cmd->add_option("--lr", opt.lr, "Learning rate");
  cmd->add_option("--batch", opt.batch, "Mini-batch size");
  cmd->add_option("--loss", opt.loss, "Training loss")
      ->check(CLI::IsMember({"ubpi", "lube", "mbpep", "pinball"}));
  cmd->add_option("--out", opt.out_dir, "Output directory")
      ->envname("UBPI_OUT_DIR");
}

// Per-loss lambda scales differ: the hybrid penalty competes with the
// batch-scaled L_UE term, LUBE's lambda sits inside an exponential, and
// MBPEP's multiplies a plain hinge.
double default_lambda(ubpi::LossKind kind) {
  switch (kind) {
    case ubpi::LossKind::ubpi: return 1000.0;
    case ubpi::LossKind::lube: return 15.0;
    case ubpi::LossKind::mbpep: return 40.0;
    case ubpi::LossKind::pinball: return 0.0;
  }
  return 0.0;
}

struct CommandDefaults {
  std::size_t epochs = 2000;
  double lr = 1e-2;
  double soften = 30.0;
  double lambda_ubpi = 1000.0;
};

ubpi::TrainConfig make_config(const CommonOptions& opt,
                              const CommandDefaults& defaults) {
  ubpi::TrainConfig config;
  config.loss = ubpi::loss_kind_from_string(opt.loss);
  config.loss_config.pc = opt.pc;
  if (opt.lambda >= 0.0)
    config.loss_config.lambda = opt.lambda;
  else
    config.loss_config.lambda = config.loss == ubpi::LossKind::ubpi
                                    ? defaults.lambda_ubpi
                                    : default_lambda(config.loss);
  config.loss_config.soften = opt.soften > 0.0 ? opt.soften : defaults.soften;
  config.batch_size = opt.batch;
  config.epochs = opt.epochs > 0 ? opt.epochs : defaults.epochs;
  config.learning_rate = opt.lr > 0.0 ? opt.lr : defaults.lr;
  config.seed = opt.seed;
  return config;
}

void echo_config(const ubpi::TrainConfig& config, std::size_t ensemble,
                 int hidden, const std::string& out_dir) {
  std::cout << "# effective configuration\n"
            << ubpi::config_echo(config) << "ensemble " << ensemble << '\n'
            << "hidden " << hidden << '\n'
            << "out " << out_dir << '\n';
}

std::pair<double, double> parse_range_pair(const std::string& text,
                                           const std::string& what) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw CLI::ValidationError(what, "expected the form lo:hi");
  char* end = nullptr;
  const std::string lo_s = text.substr(0, colon), hi_s = text.substr(colon + 1);
  const double lo = std::strtod(lo_s.c_str(), &end);
  if (end != lo_s.c_str() + lo_s.size())
    throw CLI::ValidationError(what, "cannot parse '" + lo_s + "'");
  const double hi = std::strtod(hi_s.c_str(), &end);
  if (end != hi_s.c_str() + hi_s.size())
    throw CLI::ValidationError(what, "cannot parse '" + hi_s + "'");
  return {lo, hi};
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void write_report(const fs::path& dir, const ubpi::EvalReport& report) {
  std::ostringstream kv;
  report.write_kv(kv);
  write_text_file(dir / "report.txt", kv.str());
  write_text_file(dir / "report.csv",
                  ubpi::EvalReport::csv_header() + "\n" + report.csv_row() + "\n");
  std::cout << kv.str();
}

void write_traces(const fs::path& dir, const ubpi::EnsembleTrainResult& ens) {
  for (std::size_t j = 0; j < ens.traces.size(); ++j) {
    std::ostringstream out;
    ens.traces[j].write_csv(out);
    write_text_file(dir / ("trace_member_" + std::to_string(j) + ".csv"),
                    out.str());
  }
}

// ---------------------------------------------------------------------------
// toy: train on a generated 1-D dataset, plot the interval band.

int run_toy(const std::string& which, const CommonOptions& opt,
            std::size_t n_points, const std::string& gap_text) {
  const bool wave = which == "wave";
  std::optional<std::pair<double, double>> gap;
  if (!gap_text.empty()) gap = parse_range_pair(gap_text, "--gap");

  const double x_lo = wave ? -5.0 : -3.0;
  const double x_hi = wave ? 5.0 : 3.0;
  ubpi::Batch raw = wave ? ubpi::toy_wave(n_points, opt.seed + 1000)
                         : ubpi::toy_heteroscedastic(n_points, opt.seed + 1000,
                                                     x_lo, x_hi, gap);
  const auto scaler = ubpi::Standardizer::fit(raw);
  const ubpi::Batch data = scaler.apply(raw);

  const int hidden = 50;
  // Calibrated demo recipe; every value is overridable and echoed.
  ubpi::TrainConfig config = make_config(opt, {6000, 5e-3, 20.0, 1500.0});
  config.batch_size = std::min(config.batch_size, data.n);
  echo_config(config, opt.ensemble, hidden, opt.out_dir);

  const fs::path dir = fs::path(opt.out_dir) / ("toy_" + which);
  fs::create_directories(dir);

  const auto ens = ubpi::train_ensemble(
      data, config, ubpi::member_seeds(opt.seed, opt.ensemble), hidden);
  ubpi::save_ensemble(dir / "snapshot", ens, scaler, config,
                      {opt.seed, 1.0});
  write_traces(dir, ens);

  const auto train_aggs = ubpi::predict_ensemble(ens.members, data);
  const auto train_finals = ubpi::final_intervals(train_aggs);
  const auto report =
      ubpi::evaluate(train_finals, data.targets, scaler.target_std());
  write_report(dir, report);

  // Dense grid for the band, in raw units.
  const std::size_t grid_n = 400;
  ubpi::Batch grid;
  grid.n = grid_n;
  grid.d = 1;
  grid.features.resize(grid_n);
  grid.targets.assign(grid_n, 0.0);
  std::vector<double> grid_x(grid_n);
  for (std::size_t i = 0; i < grid_n; ++i) {
    grid_x[i] = x_lo + (x_hi - x_lo) * static_cast<double>(i) /
                           static_cast<double>(grid_n - 1);
    grid.features[i] = scaler.apply_feature(0, grid_x[i]);
  }
  const auto grid_aggs = ubpi::predict_ensemble(ens.members, grid);
  std::vector<double> lower(grid_n), upper(grid_n);
  for (std::size_t i = 0; i < grid_n; ++i) {
    lower[i] = scaler.invert_target(grid_aggs[i].final_interval.lower);
    upper[i] = scaler.invert_target(grid_aggs[i].final_interval.upper);
  }

  {
    std::ostringstream csv;
    csv << "x,y\n";
    char buf[80];
    for (std::size_t i = 0; i < raw.n; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", raw.features[i],
                    raw.targets[i]);
      csv << buf;
    }
    write_text_file(dir / "points.csv", csv.str());
  }
  {
    std::ostringstream csv;
    csv << "x,lower,upper\n";
    char buf[120];
    for (std::size_t i = 0; i < grid_n; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", grid_x[i],
                    lower[i], upper[i]);
      csv << buf;
    }
    write_text_file(dir / "bounds.csv", csv.str());
  }

  ubpi::SvgPlot plot(760, 480, "toy " + which + ": prediction intervals");
  plot.set_axis_labels("x", "y");
  plot.add_band(grid_x, lower, upper, "#b0b0b0", 0.45);
  plot.add_points(raw.features, raw.targets, "#d62728", 2.5);
  plot.write((dir / "plot.svg").string());

  std::cout << "wrote " << (dir / "plot.svg").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train: CSV pipeline -> ensemble snapshot + test report.

struct LoadedDataset {
  ubpi::Batch train;
  ubpi::Batch test;
  ubpi::Standardizer scaler = ubpi::Standardizer::identity(0);
  bool large = false;
};

LoadedDataset load_dataset(const std::string& csv_path,
                           const std::string& profile_path,
                           double train_fraction, std::uint64_t split_seed) {
  const auto profile = ubpi::load_profile(profile_path);
  const auto raw = ubpi::load_csv(csv_path, profile);
  auto [train_raw, test_raw] = ubpi::split(raw, train_fraction, split_seed);
  LoadedDataset d;
  d.scaler = ubpi::Standardizer::fit(train_raw);
  d.train = d.scaler.apply(train_raw);
  d.test = d.scaler.apply(test_raw);
  d.large = profile.large;
  return d;
}

int run_train(const std::string& csv_path, const std::string& profile_path,
              const CommonOptions& opt, double train_fraction) {
  const std::uint64_t split_seed = opt.seed + 7777;
  const auto data =
      load_dataset(csv_path, profile_path, train_fraction, split_seed);
  const int hidden = data.large ? 100 : 50;

  ubpi::TrainConfig config = make_config(opt, {2000, 1e-2, 30.0, 1000.0});
  config.batch_size = std::min(config.batch_size, data.train.n);
  echo_config(config, opt.ensemble, hidden, opt.out_dir);

  const fs::path dir =
      fs::path(opt.out_dir) / ("train_" + fs::path(csv_path).stem().string());
  fs::create_directories(dir);

  const auto ens = ubpi::train_ensemble(
      data.train, config, ubpi::member_seeds(opt.seed, opt.ensemble), hidden);
  ubpi::save_ensemble(dir / "snapshot", ens, data.scaler, config,
                      {split_seed, train_fraction});
  write_traces(dir, ens);

  const auto finals =
      ubpi::final_intervals(ubpi::predict_ensemble(ens.members, data.test));
  const auto report =
      ubpi::evaluate(finals, data.test.targets, data.scaler.target_std());
  write_report(dir, report);
  std::cout << "snapshot " << (dir / "snapshot").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// sweep: one ensemble train/eval per lambda, table output.

int run_sweep(const std::string& csv_path, const std::string& profile_path,
              const CommonOptions& opt, const std::string& lambda_list,
              double train_fraction) {
  std::vector<double> lambdas;
  for (const std::string& field : ubpi::detail::split_fields(lambda_list, ',')) {
    if (field.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size())
      throw CLI::ValidationError("--lambdas",
                                 "cannot parse '" + field + "' as a number");
    lambdas.push_back(v);
  }

  const auto data =
      load_dataset(csv_path, profile_path, train_fraction, opt.seed + 7777);
  const int hidden = data.large ? 100 : 50;
  ubpi::TrainConfig config = make_config(opt, {400, 1e-2, 30.0, 1000.0});
  config.batch_size = std::min(config.batch_size, data.train.n);
  echo_config(config, opt.ensemble, hidden, opt.out_dir);

  const auto rows =
      ubpi::sweep_lambda(data.train, data.test, config, lambdas, opt.ensemble,
                         hidden, data.scaler.target_std());

  const fs::path dir =
      fs::path(opt.out_dir) / ("sweep_" + fs::path(csv_path).stem().string());
  fs::create_directories(dir);

  std::ostringstream table, csv;
  char buf[160];
  table << "lambda    PICP     MPIW\n";
  csv << "lambda," << ubpi::EvalReport::csv_header() << '\n';
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-8.6g  %-7.3f  %-7.3f\n", row.lambda,
                  row.report.picp, row.report.mpiw);
    table << buf;
    std::snprintf(buf, sizeof(buf), "%.17g,", row.lambda);
    csv << buf << row.report.csv_row() << '\n';
  }
  write_text_file(dir / "sweep.txt", table.str());
  write_text_file(dir / "sweep.csv", csv.str());
  std::cout << table.str() << "wrote " << (dir / "sweep.csv").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// plot: test-sample scatter with bound polylines from a snapshot.

int run_plot(const std::string& snapshot_dir, const std::string& csv_path,
             const std::string& profile_path, const std::string& range_text,
             const std::string& out_dir) {
  const auto snap = ubpi::load_ensemble(snapshot_dir);
  const auto profile = ubpi::load_profile(profile_path);
  const auto raw = ubpi::load_csv(csv_path, profile);
  auto [train_raw, test_raw] =
      ubpi::split(raw, snap.split_fraction, snap.split_seed);
  const ubpi::Batch test = snap.scaler.apply(test_raw);

  std::size_t lo = 0, hi = test.n;
  if (!range_text.empty()) {
    const auto [lo_d, hi_d] = parse_range_pair(range_text, "--range");
    if (lo_d < 0 || hi_d <= lo_d || hi_d > static_cast<double>(test.n))
      throw std::runtime_error(
          "--range: index range out of bounds (test split has " +
          std::to_string(test.n) + " samples)");
    lo = static_cast<std::size_t>(lo_d);
    hi = static_cast<std::size_t>(hi_d);
  }
  if (lo >= hi) throw std::runtime_error("--range: empty index range");

  const auto aggs = ubpi::predict_ensemble(snap.members, test);
  std::vector<double> idx, ys, lower, upper;
  for (std::size_t i = lo; i < hi; ++i) {
    idx.push_back(static_cast<double>(i));
    ys.push_back(snap.scaler.invert_target(test.targets[i]));
    lower.push_back(snap.scaler.invert_target(aggs[i].final_interval.lower));
    upper.push_back(snap.scaler.invert_target(aggs[i].final_interval.upper));
  }

  ubpi::SvgPlot plot(760, 480, "prediction intervals on test samples");
  plot.set_axis_labels("test sample index", "target");
  plot.add_line(idx, upper, "#d62728", 1.5);
  plot.add_line(idx, lower, "#2ca02c", 1.5);
  plot.add_points(idx, ys, "#1f77b4", 2.5);

  fs::create_directories(out_dir);
  const fs::path path = fs::path(out_dir) / "intervals.svg";
  plot.write(path.string());
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ubpi: prediction-interval networks with a hybrid uncertainty loss"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::string toy_which, gap_text, csv_path, profile_path;
  std::string lambda_list = "5,10,20,30,40,50,60";
  std::string snapshot_dir, range_text;
  std::size_t toy_n = 100;
  double train_fraction = 0.9;

  CLI::App* toy = app.add_subcommand("toy", "Train on a generated toy dataset");
  toy->add_option("which", toy_which, "Toy generator")
      ->required()
      ->check(CLI::IsMember({"wave", "heteroscedastic"}));
  toy->add_option("--n", toy_n, "Number of generated points");
  toy->add_option("--gap", gap_text, "Excluded x sub-range, lo:hi");
  add_common_flags(toy, opt);

  CLI::App* train = app.add_subcommand("train", "Train on a CSV dataset");
  train->add_option("csv", csv_path, "Dataset CSV file")->required();
  train->add_option("--profile", profile_path, "Dataset profile file")
      ->required();
  train->add_option("--train-fraction", train_fraction,
                    "Training split fraction");
  add_common_flags(train, opt);

  CLI::App* sweep = app.add_subcommand("sweep", "Lambda sweep on a CSV dataset");
  sweep->add_option("csv", csv_path, "Dataset CSV file")->required();
  sweep->add_option("--profile", profile_path, "Dataset profile file")
      ->required();
  sweep->add_option("--lambdas", lambda_list, "Comma-separated lambda values");
  sweep->add_option("--train-fraction", train_fraction,
                    "Training split fraction");
  add_common_flags(sweep, opt);

  CLI::App* plot = app.add_subcommand("plot", "Plot intervals from a snapshot");
  plot->add_option("csv", csv_path, "Dataset CSV file")->required();
  plot->add_option("--snapshot", snapshot_dir, "Ensemble snapshot directory")
      ->required();
  plot->add_option("--profile", profile_path, "Dataset profile file")
      ->required();
  plot->add_option("--range", range_text, "Test sample index range, lo:hi");
  plot->add_option("--out", opt.out_dir, "Output directory")
      ->envname("UBPI_OUT_DIR");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (toy->parsed()) return run_toy(toy_which, opt, toy_n, gap_text);
    if (train->parsed())
      return run_train(csv_path, profile_path, opt, train_fraction);
    if (sweep->parsed())
      return run_sweep(csv_path, profile_path, opt, lambda_list,
                       train_fraction);
    if (plot->parsed())
      return run_plot(snapshot_dir, csv_path, profile_path, range_text,
                      opt.out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
