#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "ubpi/data.hpp"

using namespace ubpi;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  const fs::path path = fs::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("toy_wave basics", "[data]") {
  Batch b = toy_wave(100, 7);
  CHECK(b.n == 100);
  CHECK(b.d == 1);
  for (double x : b.features) {
    CHECK(x >= -5.0);
    CHECK(x <= 5.0);
  }

  Batch again = toy_wave(100, 7);
  CHECK(b.features == again.features);
  CHECK(b.targets == again.targets);
  CHECK(toy_wave(100, 8).targets != b.targets);

  CHECK_THROWS_AS(toy_wave(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(toy_wave(10, 1, 2.0, 2.0), std::invalid_argument);
}

TEST_CASE("toy_wave noise scale matches the variance reading", "[data]") {
  // Large sample: residual about the noiseless curve should have std close
  // to sqrt(0.1); the flag switches to 0.1.
  auto residual_std = [](const Batch& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < b.n; ++i) {
      const double x = b.features[i];
      const double mean = 2.0 * std::cos(0.2 * x) + 0.2 * std::cos(10.0 * x) +
                          0.7 * std::cos(20.0 * x);
      const double r = b.targets[i] - mean;
      acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(b.n));
  };
  CHECK(residual_std(toy_wave(20000, 3)) ==
        Catch::Approx(std::sqrt(0.1)).epsilon(0.05));
  CHECK(residual_std(toy_wave(20000, 3, -5.0, 5.0, true)) ==
        Catch::Approx(0.1).epsilon(0.05));
}

TEST_CASE("toy_heteroscedastic gap and noise", "[data]") {
  auto gap = std::make_pair(-1.0, 1.0);
  Batch b = toy_heteroscedastic(500, 11, -3.0, 3.0, gap);
  for (double x : b.features) {
    CHECK((x < -1.0 || x > 1.0));
    CHECK(x >= -3.0);
    CHECK(x <= 3.0);
  }

  // Noise std is |x|: near x = 0 the target collapses to 1.5 sin(x).
  Batch near_zero = toy_heteroscedastic(50, 5, -1e-9, 1e-9);
  for (double y : near_zero.targets) CHECK(std::abs(y) < 1e-8);

  CHECK_THROWS_AS(toy_heteroscedastic(10, 1, -1.0, 1.0,
                                      std::make_pair(-2.0, 2.0)),
                  std::invalid_argument);
}

TEST_CASE("csv loading with header", "[data]") {
  const auto path = write_temp("ubpi_csv_header.csv",
                               "a,b,target\n"
                               "1.0,2.0,3.0\n"
                               "4.0,5.5,6.0\n");
  DatasetProfile profile;
  profile.target = "target";
  Batch b = load_csv(path.string(), profile);
  CHECK(b.n == 2);
  CHECK(b.d == 2);
  CHECK(b.feature(0, 0) == 1.0);
  CHECK(b.feature(1, 1) == 5.5);
  CHECK(b.targets == std::vector<double>{3.0, 6.0});
}

TEST_CASE("csv loading without header uses index references", "[data]") {
  const auto path = write_temp("ubpi_csv_plain.csv",
                               "1,2,3\n"
                               "4,5,6\n"
                               "7,8,9\n");
  DatasetProfile profile;
  profile.target = "2";
  profile.drop = {"0"};
  Batch b = load_csv(path.string(), profile);
  CHECK(b.n == 3);
  CHECK(b.d == 1);
  CHECK(b.feature(2, 0) == 8.0);
  CHECK(b.targets == std::vector<double>{3.0, 6.0, 9.0});
}

TEST_CASE("csv errors carry row and column coordinates", "[data]") {
  const auto path = write_temp("ubpi_csv_bad.csv",
                               "a,b\n"
                               "1.0,2.0\n"
                               "3.0,oops\n");
  DatasetProfile profile;
  profile.target = "b";
  try {
    load_csv(path.string(), profile);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    CHECK(what.find("row 3") != std::string::npos);
    CHECK(what.find("'b'") != std::string::npos);
    CHECK(what.find("oops") != std::string::npos);
  }
}

TEST_CASE("csv rejects structural problems", "[data]") {
  DatasetProfile profile;
  profile.target = "y";

  const auto empty = write_temp("ubpi_csv_empty.csv", "");
  CHECK_THROWS_WITH(load_csv(empty.string(), profile),
                    Catch::Matchers::ContainsSubstring("no rows"));

  const auto missing = write_temp("ubpi_csv_missing.csv", "a,b\n1,2\n");
  CHECK_THROWS_WITH(load_csv(missing.string(), profile),
                    Catch::Matchers::ContainsSubstring("no column named 'y'"));

  const auto ragged = write_temp("ubpi_csv_ragged.csv", "a,y\n1,2\n3\n");
  CHECK_THROWS_WITH(load_csv(ragged.string(), profile),
                    Catch::Matchers::ContainsSubstring("row 3"));

  const auto nan_cell = write_temp("ubpi_csv_nan.csv", "a,y\n1,nan\n");
  CHECK_THROWS_AS(load_csv(nan_cell.string(), profile), std::runtime_error);

  CHECK_THROWS_WITH(load_csv("/nonexistent/nope.csv", profile),
                    Catch::Matchers::ContainsSubstring("cannot open"));
}

TEST_CASE("profile parsing", "[data]") {
  const auto path = write_temp("ubpi_profile.profile",
                               "# benchmark profile\n"
                               "target = medv\n"
                               "large = true\n"
                               "drop = chas, rad\n");
  DatasetProfile p = load_profile(path.string());
  CHECK(p.target == "medv");
  CHECK(p.large);
  CHECK(p.drop == std::vector<std::string>{"chas", "rad"});

  const auto bad = write_temp("ubpi_profile_bad.profile", "targe = x\n");
  CHECK_THROWS_WITH(load_profile(bad.string()),
                    Catch::Matchers::ContainsSubstring("unknown profile key"));
  const auto no_target = write_temp("ubpi_profile_none.profile", "large = 0\n");
  CHECK_THROWS_WITH(load_profile(no_target.string()),
                    Catch::Matchers::ContainsSubstring("no target column"));
}

TEST_CASE("split is a deterministic exhaustive partition", "[data]") {
  Batch b = toy_wave(100, 3);
  auto [train, test] = split(b, 0.9, 42);
  CHECK(train.n == 90);
  CHECK(test.n == 10);

  // Union equals the original multiset.
  std::multiset<double> original(b.targets.begin(), b.targets.end());
  std::multiset<double> rejoined(train.targets.begin(), train.targets.end());
  rejoined.insert(test.targets.begin(), test.targets.end());
  CHECK(original == rejoined);

  auto [train2, test2] = split(b, 0.9, 42);
  CHECK(train.targets == train2.targets);
  CHECK(test.features == test2.features);

  Batch big = toy_wave(506, 3);
  auto [a1, b1] = split(big, 0.9, 1);
  auto [a2, b2] = split(big, 0.9, 2);
  CHECK(a1.targets != a2.targets);

  CHECK_THROWS_AS(split(b, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(b, 1.0, 1), std::invalid_argument);
  Batch tiny;
  tiny.n = 1;
  tiny.d = 1;
  tiny.features = {0.0};
  tiny.targets = {0.0};
  CHECK_THROWS_AS(split(tiny, 0.9, 1), std::invalid_argument);
}

TEST_CASE("standardizer normalizes the training split", "[data]") {
  Batch b = toy_wave(200, 9);
  auto [train, test] = split(b, 0.9, 1);
  const auto scaler = Standardizer::fit(train);
  const Batch strain = scaler.apply(train);

  double mean = 0.0, var = 0.0;
  for (double y : strain.targets) mean += y;
  mean /= static_cast<double>(strain.n);
  for (double y : strain.targets) var += (y - mean) * (y - mean);
  var /= static_cast<double>(strain.n);
  CHECK(std::abs(mean) < 1e-10);
  CHECK(var == Catch::Approx(1.0).epsilon(1e-10));

  for (double y : b.targets)
    CHECK(scaler.invert_target(scaler.apply_target(y)) ==
          Catch::Approx(y).margin(1e-10));

  // Fitted on train: the test split mean does not come out exactly zero.
  const Batch stest = scaler.apply(test);
  double test_mean = 0.0;
  for (double y : stest.targets) test_mean += y;
  test_mean /= static_cast<double>(stest.n);
  CHECK(std::abs(test_mean) > 1e-6);
}

TEST_CASE("standardizer rejects constant columns", "[data]") {
  Batch b;
  b.n = 3;
  b.d = 2;
  b.features = {1.0, 5.0, 1.0, 6.0, 1.0, 7.0};
  b.targets = {1.0, 2.0, 3.0};
  CHECK_THROWS_WITH(Standardizer::fit(b),
                    Catch::Matchers::ContainsSubstring("column 0"));

  Batch c = b;
  c.features = {1.0, 5.0, 2.0, 6.0, 3.0, 7.0};
  c.targets = {4.0, 4.0, 4.0};
  CHECK_THROWS_WITH(Standardizer::fit(c),
                    Catch::Matchers::ContainsSubstring("target"));
}

TEST_CASE("load/split/standardize leaves the source file unchanged", "[data]") {
  const std::string content = "a,y\n1,2\n3,4\n5,6\n7,8\n";
  const auto path = write_temp("ubpi_csv_idem.csv", content);
  DatasetProfile profile;
  profile.target = "y";
  Batch first = load_csv(path.string(), profile);
  auto [tr1, te1] = split(first, 0.5, 3);
  (void)Standardizer::fit(tr1).apply(te1);
  Batch second = load_csv(path.string(), profile);
  CHECK(first.features == second.features);
  CHECK(first.targets == second.targets);

  std::ifstream in(path);
  std::string readback((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  CHECK(readback == content);
}
