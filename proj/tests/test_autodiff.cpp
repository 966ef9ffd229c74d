#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ubpi/autodiff.hpp"
#include "ubpi/rng.hpp"

using ubpi::Rng;
using namespace ubpi::ad;

TEST_CASE("basic op values", "[autodiff]") {
  Tape tape;
  CHECK(tape.value(tape.leaf(2.0) + tape.leaf(3.0)) == 5.0);
  CHECK(tape.value(log(tape.leaf(1.0))) == 0.0);
  CHECK(tape.value(sigmoid(tape.leaf(0.0))) == 0.5);
  CHECK(tape.value(tape.leaf(2.0) * tape.leaf(4.0)) == 8.0);
  CHECK(tape.value(tape.leaf(2.0) - tape.leaf(5.0)) == -3.0);
  CHECK(tape.value(tape.leaf(1.0) / tape.leaf(4.0)) == 0.25);
  CHECK(tape.value(relu(tape.leaf(-1.5))) == 0.0);
  CHECK(tape.value(relu(tape.leaf(1.5))) == 1.5);
  CHECK(tape.value(square(tape.leaf(-3.0))) == 9.0);
  CHECK(tape.value(max(tape.leaf(2.0), 7.0)) == 7.0);
  CHECK(tape.value(tanh(tape.leaf(0.0))) == 0.0);

  std::vector<Ref> xs = {tape.leaf(1.0), tape.leaf(2.0), tape.leaf(6.0)};
  CHECK(tape.value(sum(xs)) == 9.0);
  CHECK(tape.value(mean(xs)) == 3.0);
}

TEST_CASE("simple gradients", "[autodiff]") {
  Tape tape;
  SECTION("d(x^2)/dx at 3 is 6") {
    Ref x = tape.leaf(3.0);
    tape.backward(square(x));
    CHECK(tape.gradient(x) == Catch::Approx(6.0));
  }
  SECTION("d(log x)/dx at 2 is 0.5") {
    Ref x = tape.leaf(2.0);
    tape.backward(log(x));
    CHECK(tape.gradient(x) == Catch::Approx(0.5));
  }
  SECTION("sigmoid(x)*sigmoid(-x) is stationary at 0") {
    Ref x = tape.leaf(0.0);
    Ref y = sigmoid(x) * sigmoid(0.0 - x);
    tape.backward(y);
    CHECK(tape.gradient(x) == Catch::Approx(0.0).margin(1e-15));
  }
}

TEST_CASE("domain violations are rejected eagerly", "[autodiff]") {
  Tape tape;
  CHECK_THROWS_AS(log(tape.leaf(0.0)), std::domain_error);
  CHECK_THROWS_AS(log(tape.leaf(-2.0)), std::domain_error);
  CHECK_THROWS_AS(tape.leaf(1.0) / tape.leaf(0.0), std::domain_error);
  std::vector<Ref> empty;
  CHECK_THROWS_AS(tape.sum(empty), std::invalid_argument);
  CHECK_THROWS_AS(tape.mean(empty), std::invalid_argument);
}

TEST_CASE("refs are bound to their tape", "[autodiff]") {
  Tape a, b;
  Ref x = a.leaf(1.0);
  Ref y = b.leaf(2.0);
  CHECK_THROWS_AS(a.add(x, y), std::invalid_argument);
  CHECK_THROWS_AS(b.value(x), std::invalid_argument);
}

TEST_CASE("relu and max subgradients at ties", "[autodiff]") {
  Tape tape;
  Ref x = tape.leaf(0.0);
  tape.backward(relu(x));
  CHECK(tape.gradient(x) == 0.0);

  Tape t2;
  Ref a = t2.leaf(1.0);
  Ref b = t2.leaf(1.0);
  t2.backward(t2.max(a, b));
  CHECK(t2.gradient(a) == 0.0);
  CHECK(t2.gradient(b) == 1.0);
}

TEST_CASE("unreachable nodes keep zero gradient", "[autodiff]") {
  Tape tape;
  Ref x = tape.leaf(2.0);
  Ref unrelated = square(tape.leaf(5.0));
  Ref later = tape.leaf(4.0) * tape.leaf(3.0);
  tape.backward(square(x));
  CHECK(tape.gradient(unrelated) == 0.0);
  CHECK(tape.gradient(later) == 0.0);
}

TEST_CASE("two backward passes with reset agree exactly", "[autodiff]") {
  Rng rng(17);
  Tape tape;
  std::vector<Ref> leaves;
  for (int i = 0; i < 6; ++i) leaves.push_back(tape.leaf(rng.uniform(0.5, 2.0)));
  Ref y = sigmoid(leaves[0] * leaves[1] + leaves[2]) * tanh(leaves[3]) +
          log(leaves[4]) / leaves[5] + square(leaves[0] - leaves[3]);

  tape.backward(y);
  std::vector<double> first;
  for (Ref l : leaves) first.push_back(tape.gradient(l));

  tape.zero_grad();
  tape.backward(y);
  for (std::size_t i = 0; i < leaves.size(); ++i)
    CHECK(tape.gradient(leaves[i]) == first[i]);
}

namespace {

// Random smooth scalar graph: the topology is a pure function of the seed,
// the leaf values are supplied by the caller. Operand ranges keep log/div
// in-domain; relu/max are left out so finite differences are valid anywhere.
Ref build_graph(Tape& tape, std::uint64_t seed, std::vector<double> inputs,
                std::vector<Ref>* leaves_out = nullptr) {
  Rng rng(seed);
  std::vector<Ref> leaves;
  for (double v : inputs) leaves.push_back(tape.leaf(v));
  if (leaves_out) *leaves_out = leaves;
  std::vector<Ref> pool = leaves;
  const int n_ops = 4 + static_cast<int>(rng.index(12));
  for (int i = 0; i < n_ops; ++i) {
    const Ref a = pool[rng.index(pool.size())];
    const Ref b = pool[rng.index(pool.size())];
    Ref out;
    switch (rng.index(9)) {
      case 0: out = a + b; break;
      case 1: out = a - b + 3.0; break;
      case 2: out = a * b; break;
      case 3: out = a / (square(b) + 1.0); break;
      case 4: out = exp(a * 0.3); break;
      case 5: out = log(square(a) + 1.0); break;
      case 6: out = sigmoid(a); break;
      case 7: out = tanh(a * 0.5); break;
      default: out = square(a) * 0.25 + 0.5; break;
    }
    pool.push_back(out);
  }
  std::vector<Ref> tail(pool.end() - std::min<std::size_t>(pool.size(), 4),
                        pool.end());
  return mean(tail);
}

}  // namespace

TEST_CASE("gradients agree with central finite differences", "[autodiff]") {
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint64_t seed = 1000 + trial;
    Rng value_rng(seed * 7 + 1);
    std::vector<double> inputs(2 + value_rng.index(5));
    for (double& v : inputs) v = value_rng.uniform(0.6, 2.2);

    Tape tape;
    std::vector<Ref> leaves;
    tape.backward(build_graph(tape, seed, inputs, &leaves));

    for (std::size_t i = 0; i < inputs.size(); ++i) {
      auto eval = [&](double xi) {
        std::vector<double> shifted = inputs;
        shifted[i] = xi;
        Tape scratch;
        return scratch.value(build_graph(scratch, seed, shifted));
      };
      const double fd = (eval(inputs[i] + h) - eval(inputs[i] - h)) / (2 * h);
      const double an = tape.gradient(leaves[i]);
      const double err = std::abs(an - fd);
      const bool ok =
          err < 1e-7 || err / std::max(std::abs(an), std::abs(fd)) < 1e-4;
      INFO("trial " << trial << " leaf " << i << " analytic " << an << " fd "
                    << fd);
      CHECK(ok);
    }
  }
}
