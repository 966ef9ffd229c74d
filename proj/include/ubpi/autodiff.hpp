#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ubpi::ad {

class Tape;

// Handle to one scalar node on a tape. Plain value type; stays valid until
// the owning tape is cleared or destroyed.
struct Ref {
  Tape* tape = nullptr;
  std::int32_t id = -1;
};

// Reverse-mode tape. Expressions are evaluated eagerly while the graph is
// recorded: every node's value is fixed at construction and never mutated,
// and creation order is a topological order of the graph. backward(root)
// accumulates d(root)/d(node) into each node's gradient slot with a single
// reverse sweep.
//
// A tape is confined to one thread; independent tapes may run in parallel.
// Typical use rebuilds the tape per mini-batch via clear(), which keeps the
// allocated storage.
class Tape {
 public:
  enum class Op : std::uint8_t {
    leaf,
    add,
    sub,
    mul,
    div,
    exp,
    log,
    sigmoid,
    tanh,
    relu,
    max,
    square,
    sum,
    mean,
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input node (parameter, bound, ...).
  Ref leaf(double value) { return push(Op::leaf, value, -1, -1); }

  // Same mechanics as leaf(); the name records that the gradient is unused.
  Ref constant(double value) { return leaf(value); }

  Ref add(Ref a, Ref b) { return push(Op::add, val(a) + val(b), a.id, b.id); }
  Ref sub(Ref a, Ref b) { return push(Op::sub, val(a) - val(b), a.id, b.id); }
  Ref mul(Ref a, Ref b) { return push(Op::mul, val(a) * val(b), a.id, b.id); }

  Ref div(Ref a, Ref b) {
    if (val(b) == 0.0) throw std::domain_error("ad: division by zero");
    return push(Op::div, val(a) / val(b), a.id, b.id);
  }

  Ref exp(Ref a) { return push(Op::exp, std::exp(val(a)), a.id, -1); }

  Ref log(Ref a) {
    if (!(val(a) > 0.0))
      throw std::domain_error("ad: log of non-positive value " +
                              std::to_string(val(a)));
    return push(Op::log, std::log(val(a)), a.id, -1);
  }

  Ref sigmoid(Ref a) {
    return push(Op::sigmoid, sigmoid_value(val(a)), a.id, -1);
  }

  Ref tanh(Ref a) { return push(Op::tanh, std::tanh(val(a)), a.id, -1); }

  // Subgradient 0 at exactly 0.
  Ref relu(Ref a) {
    return push(Op::relu, val(a) > 0.0 ? val(a) : 0.0, a.id, -1);
  }

  // Ties route the gradient to the second operand, so max(x, c) has zero
  // gradient in x when x == c. Consistent with relu's subgradient at 0.
  Ref max(Ref a, Ref b) {
    return push(Op::max, val(a) > val(b) ? val(a) : val(b), a.id, b.id);
  }

  Ref square(Ref a) { return push(Op::square, val(a) * val(a), a.id, -1); }

  Ref sum(std::span<const Ref> xs) { return nary(Op::sum, xs); }
  Ref mean(std::span<const Ref> xs) { return nary(Op::mean, xs); }

  double value(Ref r) const { return val_[check(r)]; }
  double gradient(Ref r) const { return grad_[check(r)]; }

  void zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

  // Accumulates into the gradient slots; call zero_grad() between passes
  // when accumulation is not wanted. Nodes outside the root's cone keep
  // whatever they held (0 after zero_grad or on a fresh tape).
  void backward(Ref root) {
    const std::int32_t r = static_cast<std::int32_t>(check(root));
    grad_[r] += 1.0;
    for (std::int32_t i = r; i >= 0; --i) {
      const double g = grad_[i];
      if (g == 0.0) continue;
      const std::int32_t a = a_[i];
      const std::int32_t b = b_[i];
      switch (op_[i]) {
        case Op::leaf:
          break;
        case Op::add:
          grad_[a] += g;
          grad_[b] += g;
          break;
        case Op::sub:
          grad_[a] += g;
          grad_[b] -= g;
          break;
        case Op::mul:
          grad_[a] += g * val_[b];
          grad_[b] += g * val_[a];
          break;
        case Op::div:
          grad_[a] += g / val_[b];
          grad_[b] -= g * val_[a] / (val_[b] * val_[b]);
          break;
        case Op::exp:
          grad_[a] += g * val_[i];
          break;
        case Op::log:
          grad_[a] += g / val_[a];
          break;
        case Op::sigmoid:
          grad_[a] += g * val_[i] * (1.0 - val_[i]);
          break;
        case Op::tanh:
          grad_[a] += g * (1.0 - val_[i] * val_[i]);
          break;
        case Op::relu:
          if (val_[a] > 0.0) grad_[a] += g;
          break;
        case Op::max:
          if (val_[a] > val_[b])
            grad_[a] += g;
          else
            grad_[b] += g;
          break;
        case Op::square:
          grad_[a] += 2.0 * val_[a] * g;
          break;
        case Op::sum:
          for (std::int32_t k = 0; k < b; ++k) grad_[args_[a + k]] += g;
          break;
        case Op::mean: {
          const double share = g / static_cast<double>(b);
          for (std::int32_t k = 0; k < b; ++k) grad_[args_[a + k]] += share;
          break;
        }
      }
    }
  }

  // Drops all nodes but keeps the allocated storage for reuse.
  void clear() {
    op_.clear();
    a_.clear();
    b_.clear();
    val_.clear();
    grad_.clear();
    args_.clear();
  }

  std::size_t size() const { return op_.size(); }

  static double sigmoid_value(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

 private:
  Ref push(Op op, double value, std::int32_t a, std::int32_t b) {
    op_.push_back(op);
    a_.push_back(a);
    b_.push_back(b);
    val_.push_back(value);
    grad_.push_back(0.0);
    return Ref{this, static_cast<std::int32_t>(op_.size() - 1)};
  }

  // For sum/mean the a-slot is an offset into args_ and the b-slot a count.
  Ref nary(Op op, std::span<const Ref> xs) {
    if (xs.empty())
      throw std::invalid_argument("ad: sum/mean over an empty operand list");
    double acc = 0.0;
    const std::int32_t offset = static_cast<std::int32_t>(args_.size());
    for (const Ref& x : xs) {
      acc += val_[check(x)];
      args_.push_back(x.id);
    }
    if (op == Op::mean) acc /= static_cast<double>(xs.size());
    return push(op, acc, offset, static_cast<std::int32_t>(xs.size()));
  }

  double val(Ref r) const { return val_[check(r)]; }

  std::size_t check(Ref r) const {
    if (r.tape != this || r.id < 0 ||
        static_cast<std::size_t>(r.id) >= op_.size())
      throw std::invalid_argument("ad: ref does not belong to this tape");
    return static_cast<std::size_t>(r.id);
  }

  std::vector<Op> op_;
  std::vector<std::int32_t> a_;
  std::vector<std::int32_t> b_;
  std::vector<double> val_;
  std::vector<double> grad_;
  std::vector<std::int32_t> args_;
};

inline Ref operator+(Ref a, Ref b) { return a.tape->add(a, b); }
inline Ref operator-(Ref a, Ref b) { return a.tape->sub(a, b); }
inline Ref operator*(Ref a, Ref b) { return a.tape->mul(a, b); }
inline Ref operator/(Ref a, Ref b) { return a.tape->div(a, b); }

inline Ref operator+(Ref a, double b) { return a + a.tape->constant(b); }
inline Ref operator+(double a, Ref b) { return b.tape->constant(a) + b; }
inline Ref operator-(Ref a, double b) { return a - a.tape->constant(b); }
inline Ref operator-(double a, Ref b) { return b.tape->constant(a) - b; }
inline Ref operator*(Ref a, double b) { return a * a.tape->constant(b); }
inline Ref operator*(double a, Ref b) { return b.tape->constant(a) * b; }
inline Ref operator/(Ref a, double b) { return a / a.tape->constant(b); }
inline Ref operator/(double a, Ref b) { return b.tape->constant(a) / b; }

inline Ref exp(Ref a) { return a.tape->exp(a); }
inline Ref log(Ref a) { return a.tape->log(a); }
inline Ref sigmoid(Ref a) { return a.tape->sigmoid(a); }
inline Ref tanh(Ref a) { return a.tape->tanh(a); }
inline Ref relu(Ref a) { return a.tape->relu(a); }
inline Ref square(Ref a) { return a.tape->square(a); }
inline Ref max(Ref a, Ref b) { return a.tape->max(a, b); }
inline Ref max(Ref a, double b) { return a.tape->max(a, a.tape->constant(b)); }
inline Ref sum(std::span<const Ref> xs) { return xs.front().tape->sum(xs); }
inline Ref mean(std::span<const Ref> xs) { return xs.front().tape->mean(xs); }

}  // namespace ubpi::ad
