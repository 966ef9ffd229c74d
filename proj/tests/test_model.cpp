#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ubpi/model.hpp"

using namespace ubpi;

TEST_CASE("midpoint and width", "[model]") {
  CHECK(midpoint(Interval{0.0, 2.0}) == 1.0);
  CHECK(midpoint(Interval{-1.0, 1.0}) == 0.0);
  CHECK(midpoint(Interval{1.16, 3.04}) == Catch::Approx(2.10));
  CHECK(width(Interval{1.0, 0.0}) == -1.0);
}

TEST_CASE("init shapes and determinism", "[model]") {
  NetworkParams net = init_network(13, 50, 123);
  CHECK(net.w1.size() == 13u * 50u);
  CHECK(net.b1.size() == 50u);
  CHECK(net.w2.size() == 100u);
  CHECK(net.b2.size() == 2u);
  CHECK(net.b2[0] == -kOutputBiasOffset);
  CHECK(net.b2[1] == +kOutputBiasOffset);
  CHECK(net.finite());

  CHECK(init_network(13, 50, 123) == net);
  CHECK(init_network(13, 50, 124) != net);

  const double limit = std::sqrt(6.0 / (13 + 50));
  for (double w : net.w1) {
    CHECK(w >= -limit);
    CHECK(w <= limit);
  }

  CHECK_THROWS_AS(init_network(0, 50, 1), std::invalid_argument);
  CHECK_THROWS_AS(init_network(5, 0, 1), std::invalid_argument);
}

TEST_CASE("predict on zero weights yields the bias interval", "[model]") {
  NetworkParams net = init_network(2, 4, 1);
  std::fill(net.w1.begin(), net.w1.end(), 0.0);
  std::fill(net.w2.begin(), net.w2.end(), 0.0);

  Batch batch;
  batch.n = 3;
  batch.d = 2;
  batch.features = {0.5, -1.0, 2.0, 3.0, 0.0, 0.0};
  batch.targets = {0.0, 0.0, 0.0};
  const auto intervals = predict(net, batch);
  for (const Interval& iv : intervals) {
    CHECK(iv.lower == -kOutputBiasOffset);
    CHECK(iv.upper == +kOutputBiasOffset);
  }
}

TEST_CASE("predict is pure and respects duplicates", "[model]") {
  NetworkParams net = init_network(3, 8, 5);
  Batch batch;
  batch.n = 4;
  batch.d = 3;
  batch.features = {1, 2, 3, 1, 2, 3, -1, 0, 1, 1, 2, 3};
  batch.targets = {0, 0, 0, 0};

  const auto a = predict(net, batch);
  const auto b = predict(net, batch);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].lower == b[i].lower);
    CHECK(a[i].upper == b[i].upper);
  }
  CHECK(a[0].lower == a[1].lower);
  CHECK(a[0].upper == a[3].upper);

  Batch wrong = batch;
  wrong.d = 2;
  wrong.features.resize(8);
  CHECK_THROWS_AS(predict(net, wrong), std::invalid_argument);
}

TEST_CASE("perturbing one hidden weight changes some output", "[model]") {
  NetworkParams net = init_network(2, 6, 9);
  Batch batch;
  batch.n = 2;
  batch.d = 2;
  batch.features = {0.7, -0.3, 1.4, 0.9};
  batch.targets = {0, 0};
  const auto before = predict(net, batch);
  net.w1[3] += 0.25;
  const auto after = predict(net, batch);
  bool changed = false;
  for (std::size_t i = 0; i < before.size(); ++i)
    changed = changed || before[i].lower != after[i].lower ||
              before[i].upper != after[i].upper;
  CHECK(changed);
}

TEST_CASE("no crossed intervals at initialization", "[model]") {
  Batch data = toy_wave(200, 21);
  const auto scaler = Standardizer::fit(data);
  const Batch standardized = scaler.apply(data);
  NetworkParams net = init_network(1, 50, 77);
  const auto intervals = predict(net, standardized);
  for (const Interval& iv : intervals) CHECK(iv.upper > iv.lower);
}

TEST_CASE("tape forward matches plain predict", "[model]") {
  Batch data = toy_wave(32, 4);
  const auto scaler = Standardizer::fit(data);
  const Batch standardized = scaler.apply(data);
  NetworkParams net = init_network(1, 10, 3);

  std::vector<std::size_t> rows = {0, 5, 9, 31};
  ad::Tape tape;
  const TapeForward fwd = forward_on_tape(tape, net, standardized, rows);
  const auto plain = predict(net, standardized);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(tape.value(fwd.lower[k]) ==
          Catch::Approx(plain[rows[k]].lower).margin(1e-12));
    CHECK(tape.value(fwd.upper[k]) ==
          Catch::Approx(plain[rows[k]].upper).margin(1e-12));
  }
  CHECK(fwd.params.size() == net.count());
}

TEST_CASE("model snapshot round-trips bit-exactly", "[model]") {
  NetworkParams net = init_network(1, 13, 99);
  net.w1[5] = 1.0 / 3.0;  // value without a short decimal form
  Batch data = toy_wave(64, 6);
  const auto scaler = Standardizer::fit(data);

  std::ostringstream first;
  save_model(first, net, scaler);

  std::istringstream in(first.str());
  auto [loaded, loaded_scaler] = load_model(in, "buffer");
  CHECK(loaded == net);
  CHECK(loaded_scaler.target_mean() == scaler.target_mean());
  CHECK(loaded_scaler.target_std() == scaler.target_std());
  CHECK(loaded_scaler.feature_means() == scaler.feature_means());

  std::ostringstream second;
  save_model(second, loaded, loaded_scaler);
  CHECK(first.str() == second.str());
}

TEST_CASE("model snapshot rejects corrupt input", "[model]") {
  std::istringstream not_magic("something 1\n");
  CHECK_THROWS_AS(load_model(not_magic, "buffer"), std::runtime_error);

  NetworkParams net = init_network(2, 3, 1);
  const auto scaler = Standardizer::identity(2);
  std::ostringstream out;
  save_model(out, net, scaler);
  std::string text = out.str();
  text.resize(text.size() / 2);  // truncate
  std::istringstream in(text);
  CHECK_THROWS_AS(load_model(in, "buffer"), std::runtime_error);
}
