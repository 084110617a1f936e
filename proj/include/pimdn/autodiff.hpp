#pragma once

// Reverse-mode differentiation over a define-by-run scalar tape.
//
// Every operation appends one node holding its value and the local partial
// derivative with respect to each parent. Parents always precede children,
// so a single reverse sweep accumulates adjoints. Values that are not on a
// tape (index -1) behave as constants and produce no edges.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace pimdn::ad {

enum class Op : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  div,
  neg,
  exp,
  log,
  tanh,
  elu,
  square,
  max0,
  clamp,
  add_const,    // x + c
  mul_const,    // x * c
  const_sub,    // c - x
  div_const,    // x / c
  const_div,    // c / x
  sum,          // n-ary
  log_sum_exp,  // n-ary, max-shifted
  gaussian_mix, // log sum_k exp(o_k - ((u - m_k) s_k)^2 / 2), parents (o, m, s) per k, aux = u
  mixture_loglik,  // sum_i log p(u_i) of a softmax-weighted Gaussian mixture; pool holds lo, hi, u_i
};

class Tape;

/// Handle to a tape node, or a plain constant when not attached to a tape.
class Var {
 public:
  Var() = default;
  Var(double constant) : value_(constant) {}  // NOLINT: implicit by design of the scalar API

  double value() const { return value_; }
  std::int32_t index() const { return index_; }
  Tape* tape() const { return tape_; }
  bool is_constant() const { return tape_ == nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::int32_t index, double value) : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  std::int32_t index_ = -1;
  double value_ = 0.0;
};

/// Adjoints of one reverse sweep.
class Gradient {
 public:
  Gradient() = default;
  Gradient(std::vector<double> adjoints, Eigen::VectorXd parameters)
      : adjoints_(std::move(adjoints)), parameters_(std::move(parameters)) {}

  /// d(output)/d(v); zero for constants and nodes the output does not reach.
  double wrt(const Var& v) const {
    return v.is_constant() ? 0.0 : adjoints_[static_cast<std::size_t>(v.index())];
  }
  double node(std::size_t i) const { return adjoints_[i]; }

  /// Gradient over the registered parameter leaves, in registration order.
  const Eigen::VectorXd& parameters() const { return parameters_; }

 private:
  std::vector<double> adjoints_;
  Eigen::VectorXd parameters_;
};

class Tape {
 public:
  struct Node {
    Op op;
    std::uint32_t first_edge;
    std::uint32_t edge_count;
    double value;
    double aux;  // constant operand or clamp bound
    double aux2;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that is not registered as a parameter.
  Var variable(double value);
  /// Appends one leaf per value to `out`.
  void variables(std::span<const double> values, std::vector<Var>& out);
  /// Leaf whose adjoint is reported by Gradient::parameters().
  Var parameter(double value);

  std::size_t size() const { return nodes_.size(); }
  std::size_t parameter_count() const { return parameters_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::span<const std::uint32_t> parents(std::size_t i) const {
    const Node& n = nodes_[i];
    return {edge_parent_.data() + n.first_edge, n.edge_count};
  }
  std::span<const double> partials(std::size_t i) const {
    const Node& n = nodes_[i];
    return {edge_partial_.data() + n.first_edge, n.edge_count};
  }

  /// Copies constants into the tape's data pool; returns their offset.
  std::size_t store(std::span<const double> values);
  std::span<const double> data(std::size_t offset, std::size_t count) const {
    return {pool_.data() + offset, count};
  }

  /// Drops all nodes while keeping storage for the next iteration.
  void clear();

  Gradient backward(const Var& output) const;

  /// Re-evaluates node i from the stored values of its parents.
  double recompute(std::size_t i) const;

  // Node construction used by the operator overloads below.
  Var unary(Op op, const Var& x, double value, double partial, double aux = 0.0, double aux2 = 0.0);
  Var binary(Op op, const Var& a, const Var& b, double value, double da, double db);
  /// Empty `partials` means every partial is 1.
  Var nary(Op op, std::span<const Var> xs, double value, std::span<const double> partials,
           double aux = 0.0, double aux2 = 0.0);

 private:
  Var push(Op op, double value, double aux, double aux2);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> edge_parent_;
  std::vector<double> edge_partial_;
  std::vector<std::int32_t> parameters_;
  std::vector<double> pool_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

// Comparisons act on values; they do not create nodes.
inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }
inline bool operator==(const Var& a, const Var& b) { return a.value() == b.value(); }
inline bool operator!=(const Var& a, const Var& b) { return a.value() != b.value(); }

Var exp(const Var& x);
Var log(const Var& x);
Var tanh(const Var& x);
/// x for x >= 0, e^x - 1 otherwise; derivative 1 at 0.
Var elu(const Var& x);
Var square(const Var& x);
/// max(0, x); derivative 0 at 0.
Var max0(const Var& x);
/// Derivative 1 inside [lo, hi] and 0 outside.
Var clamp(const Var& x, double lo, double hi);
Var sum(std::span<const Var> xs);
/// log(sum exp(x_i)), evaluated around the maximum.
Var log_sum_exp(std::span<const Var> xs);
/// Log of a weighted Gaussian sum at u. `terms` holds (offset, mean, inverse
/// scale) triples; the value is the max-shifted log-sum-exp of
/// offset - ((u - mean) * inverse_scale)^2 / 2.
Var gaussian_mix(std::span<const Var> terms, double u);
/// sum_i log sum_k pi_k N(u_i; mean_k, exp(clamp(log_scale_k, lo, hi))) with
/// pi = softmax(logits). `heads` holds M logits, then M means, then M raw log-scales.
Var mixture_loglik(std::span<const Var> heads, std::span<const double> targets, double lo,
                   double hi);

// Plain double overloads so templated code can call the same names.
inline double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }
inline double square(double x) { return x * x; }
inline double max0(double x) { return x > 0.0 ? x : 0.0; }
inline double clamp(double x, double lo, double hi) { return std::clamp(x, lo, hi); }
inline double sum(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}
double log_sum_exp(std::span<const double> xs);
double gaussian_mix(std::span<const double> terms, double u);
double mixture_loglik(std::span<const double> heads, std::span<const double> targets, double lo,
                      double hi);

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

}  // namespace pimdn::ad

namespace Eigen {

template <>
struct NumTraits<pimdn::ad::Var> : NumTraits<double> {
  using Real = pimdn::ad::Var;
  using NonInteger = pimdn::ad::Var;
  using Nested = pimdn::ad::Var;
  using Literal = pimdn::ad::Var;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3,
  };
};

}  // namespace Eigen
