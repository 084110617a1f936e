#include "pimdn/autodiff.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include "pimdn/errors.hpp"

namespace pimdn::ad {

namespace {

void require_finite(double value, long node) {
  if (!std::isfinite(value)) throw NonFiniteValue(node);
}

Tape* tape_of(const Var& a, const Var& b) { return a.tape() != nullptr ? a.tape() : b.tape(); }

}  // namespace

Var Tape::push(Op op, double value, double aux, double aux2) {
  const auto index = static_cast<std::int32_t>(nodes_.size());
  require_finite(value, index);
  nodes_.push_back(Node{op, static_cast<std::uint32_t>(edge_parent_.size()), 0, value, aux, aux2});
  return Var(this, index, value);
}

Var Tape::variable(double value) { return push(Op::leaf, value, 0.0, 0.0); }

void Tape::variables(std::span<const double> values, std::vector<Var>& out) {
  const auto edge = static_cast<std::uint32_t>(edge_parent_.size());
  for (double v : values) {
    const auto index = static_cast<std::int32_t>(nodes_.size());
    require_finite(v, index);
    nodes_.push_back(Node{Op::leaf, edge, 0, v, 0.0, 0.0});
    out.push_back(Var(this, index, v));
  }
}

Var Tape::parameter(double value) {
  Var v = push(Op::leaf, value, 0.0, 0.0);
  parameters_.push_back(v.index());
  return v;
}

std::size_t Tape::store(std::span<const double> values) {
  const std::size_t offset = pool_.size();
  pool_.insert(pool_.end(), values.begin(), values.end());
  return offset;
}

void Tape::clear() {
  pool_.clear();
  nodes_.clear();
  edge_parent_.clear();
  edge_partial_.clear();
  parameters_.clear();
}

Var Tape::unary(Op op, const Var& x, double value, double partial, double aux, double aux2) {
  Var out = push(op, value, aux, aux2);
  edge_parent_.push_back(static_cast<std::uint32_t>(x.index()));
  edge_partial_.push_back(partial);
  nodes_.back().edge_count = 1;
  return out;
}

Var Tape::binary(Op op, const Var& a, const Var& b, double value, double da, double db) {
  Var out = push(op, value, 0.0, 0.0);
  edge_parent_.push_back(static_cast<std::uint32_t>(a.index()));
  edge_partial_.push_back(da);
  edge_parent_.push_back(static_cast<std::uint32_t>(b.index()));
  edge_partial_.push_back(db);
  nodes_.back().edge_count = 2;
  return out;
}

Var Tape::nary(Op op, std::span<const Var> xs, double value, std::span<const double> partials,
               double aux, double aux2) {
  // Constant operands become leaves so that recompute() sees every input.
  std::size_t lifted = nodes_.size();
  for (const Var& x : xs) {
    if (x.is_constant()) variable(x.value());
  }
  Var out = push(op, value, aux, aux2);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (xs[k].is_constant()) {
      edge_parent_.push_back(static_cast<std::uint32_t>(lifted++));
    } else {
      edge_parent_.push_back(static_cast<std::uint32_t>(xs[k].index()));
    }
    edge_partial_.push_back(partials.empty() ? 1.0 : partials[k]);
  }
  nodes_.back().edge_count = static_cast<std::uint32_t>(xs.size());
  return out;
}

Gradient Tape::backward(const Var& output) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  Eigen::VectorXd params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameters_.size()));
  if (output.is_constant()) return Gradient(std::move(adj), std::move(params));

  const auto top = static_cast<std::size_t>(output.index());
  adj[top] = 1.0;
  for (std::size_t i = top + 1; i-- > 0;) {
    const double a = adj[i];
    if (a == 0.0) continue;
    const Node& n = nodes_[i];
    const std::uint32_t end = n.first_edge + n.edge_count;
    for (std::uint32_t e = n.first_edge; e < end; ++e) adj[edge_parent_[e]] += a * edge_partial_[e];
  }
  for (std::size_t k = 0; k < parameters_.size(); ++k) {
    params[static_cast<Eigen::Index>(k)] = adj[static_cast<std::size_t>(parameters_[k])];
  }
  return Gradient(std::move(adj), std::move(params));
}

double Tape::recompute(std::size_t i) const {
  const Node& n = nodes_[i];
  auto in = [&](std::size_t k) { return nodes_[edge_parent_[n.first_edge + k]].value; };
  switch (n.op) {
    case Op::leaf:
      return n.value;
    case Op::add:
      return in(0) + in(1);
    case Op::sub:
      return in(0) - in(1);
    case Op::mul:
      return in(0) * in(1);
    case Op::div:
      return in(0) / in(1);
    case Op::neg:
      return -in(0);
    case Op::exp:
      return std::exp(in(0));
    case Op::log:
      return std::log(in(0));
    case Op::tanh:
      return std::tanh(in(0));
    case Op::elu:
      return elu(in(0));
    case Op::square:
      return in(0) * in(0);
    case Op::max0:
      return max0(in(0));
    case Op::clamp:
      return std::clamp(in(0), n.aux, n.aux2);
    case Op::add_const:
      return in(0) + n.aux;
    case Op::mul_const:
      return in(0) * n.aux;
    case Op::const_sub:
      return n.aux - in(0);
    case Op::div_const:
      return in(0) / n.aux;
    case Op::const_div:
      return n.aux / in(0);
    case Op::sum: {
      double s = 0.0;
      for (std::uint32_t k = 0; k < n.edge_count; ++k) s += in(k);
      return s;
    }
    case Op::log_sum_exp:
    case Op::gaussian_mix:
    case Op::mixture_loglik: {
      std::vector<double> xs(n.edge_count);
      for (std::uint32_t k = 0; k < n.edge_count; ++k) xs[k] = in(k);
      if (n.op == Op::log_sum_exp) return log_sum_exp(std::span<const double>(xs));
      if (n.op == Op::gaussian_mix) return gaussian_mix(std::span<const double>(xs), n.aux);
      const auto pool = data(static_cast<std::size_t>(n.aux), static_cast<std::size_t>(n.aux2));
      return mixture_loglik(std::span<const double>(xs), pool.subspan(2), pool[0], pool[1]);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

Var operator+(const Var& a, const Var& b) {
  const double v = a.value() + b.value();
  if (a.is_constant() && b.is_constant()) return Var(v);
  if (a.is_constant()) return b.tape()->unary(Op::add_const, b, v, 1.0, a.value());
  if (b.is_constant()) return a.tape()->unary(Op::add_const, a, v, 1.0, b.value());
  return a.tape()->binary(Op::add, a, b, v, 1.0, 1.0);
}

Var operator-(const Var& a, const Var& b) {
  const double v = a.value() - b.value();
  if (a.is_constant() && b.is_constant()) return Var(v);
  if (a.is_constant()) return b.tape()->unary(Op::const_sub, b, v, -1.0, a.value());
  // x - c and x + (-c) round identically.
  if (b.is_constant()) return a.tape()->unary(Op::add_const, a, v, 1.0, -b.value());
  return a.tape()->binary(Op::sub, a, b, v, 1.0, -1.0);
}

Var operator*(const Var& a, const Var& b) {
  const double v = a.value() * b.value();
  if (a.is_constant() && b.is_constant()) return Var(v);
  if (a.is_constant()) return b.tape()->unary(Op::mul_const, b, v, a.value(), a.value());
  if (b.is_constant()) return a.tape()->unary(Op::mul_const, a, v, b.value(), b.value());
  return tape_of(a, b)->binary(Op::mul, a, b, v, b.value(), a.value());
}

Var operator/(const Var& a, const Var& b) {
  const double v = a.value() / b.value();
  if (a.is_constant() && b.is_constant()) {
    require_finite(v, -1);
    return Var(v);
  }
  if (b.value() == 0.0) {
    throw NonFiniteValue(static_cast<long>(tape_of(a, b)->size()));
  }
  const double inv = 1.0 / b.value();
  if (a.is_constant()) return b.tape()->unary(Op::const_div, b, v, -v * inv, a.value());
  if (b.is_constant()) return a.tape()->unary(Op::div_const, a, v, inv, b.value());
  return a.tape()->binary(Op::div, a, b, v, inv, -v * inv);
}

Var operator-(const Var& a) {
  if (a.is_constant()) return Var(-a.value());
  return a.tape()->unary(Op::neg, a, -a.value(), -1.0);
}

Var exp(const Var& x) {
  const double v = std::exp(x.value());
  if (x.is_constant()) {
    require_finite(v, -1);
    return Var(v);
  }
  return x.tape()->unary(Op::exp, x, v, v);
}

Var log(const Var& x) {
  if (!(x.value() > 0.0)) {
    throw NonFiniteValue(x.is_constant() ? -1L : static_cast<long>(x.tape()->size()));
  }
  const double v = std::log(x.value());
  if (x.is_constant()) return Var(v);
  return x.tape()->unary(Op::log, x, v, 1.0 / x.value());
}

Var tanh(const Var& x) {
  const double v = std::tanh(x.value());
  if (x.is_constant()) return Var(v);
  return x.tape()->unary(Op::tanh, x, v, 1.0 - v * v);
}

Var elu(const Var& x) {
  const double v = elu(x.value());
  if (x.is_constant()) return Var(v);
  return x.tape()->unary(Op::elu, x, v, x.value() >= 0.0 ? 1.0 : v + 1.0);
}

Var square(const Var& x) {
  const double v = x.value() * x.value();
  if (x.is_constant()) return Var(v);
  return x.tape()->unary(Op::square, x, v, 2.0 * x.value());
}

Var max0(const Var& x) {
  const double v = max0(x.value());
  if (x.is_constant()) return Var(v);
  return x.tape()->unary(Op::max0, x, v, x.value() > 0.0 ? 1.0 : 0.0);
}

Var clamp(const Var& x, double lo, double hi) {
  const double v = std::clamp(x.value(), lo, hi);
  if (x.is_constant()) return Var(v);
  const double d = (x.value() >= lo && x.value() <= hi) ? 1.0 : 0.0;
  return x.tape()->unary(Op::clamp, x, v, d, lo, hi);
}

Var sum(std::span<const Var> xs) {
  Tape* tape = nullptr;
  double s = 0.0;
  for (const Var& x : xs) {
    s += x.value();
    if (!x.is_constant()) tape = x.tape();
  }
  if (tape == nullptr) return Var(s);
  return tape->nary(Op::sum, xs, s, {});
}

double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

namespace {

/// Fixed-capacity scratch that spills to the heap for long operand lists.
class Scratch {
 public:
  explicit Scratch(std::size_t n) : data_(n <= kInline ? inline_ : (heap_.resize(n), heap_.data())) {}
  double& operator[](std::size_t k) { return data_[k]; }
  std::span<const double> view(std::size_t n) const { return {data_, n}; }

 private:
  static constexpr std::size_t kInline = 48;
  double inline_[kInline];
  std::vector<double> heap_;
  double* data_;
};

Tape* tape_in(std::span<const Var> xs) {
  for (const Var& x : xs) {
    if (!x.is_constant()) return x.tape();
  }
  return nullptr;
}

}  // namespace

Var log_sum_exp(std::span<const Var> xs) {
  Tape* tape = tape_in(xs);
  double m = -std::numeric_limits<double>::infinity();
  for (const Var& x : xs) m = std::max(m, x.value());
  Scratch w(xs.size());
  double s = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    w[k] = std::exp(xs[k].value() - m);
    s += w[k];
  }
  const double v = m + std::log(s);
  if (tape == nullptr) {
    require_finite(v, -1);
    return Var(v);
  }
  for (std::size_t k = 0; k < xs.size(); ++k) w[k] /= s;
  return tape->nary(Op::log_sum_exp, xs, v, w.view(xs.size()));
}

double gaussian_mix(std::span<const double> terms, double u) {
  const std::size_t n = terms.size() / 3;
  Scratch logs(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double z = (u - terms[3 * k + 1]) * terms[3 * k + 2];
    logs[k] = terms[3 * k] - 0.5 * (z * z);
  }
  return log_sum_exp(logs.view(n));
}

Var gaussian_mix(std::span<const Var> terms, double u) {
  if (terms.empty() || terms.size() % 3 != 0) {
    throw InvalidInput("gaussian_mix needs (offset, mean, inverse scale) triples");
  }
  const std::size_t n = terms.size() / 3;
  Scratch logs(n);
  Scratch zs(n);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const double z = (u - terms[3 * k + 1].value()) * terms[3 * k + 2].value();
    zs[k] = z;
    logs[k] = terms[3 * k].value() - 0.5 * (z * z);
    m = std::max(m, logs[k]);
  }
  double s = 0.0;
  if (std::isfinite(m)) {
    for (std::size_t k = 0; k < n; ++k) s += std::exp(logs[k] - m);
  }
  const double v = std::isfinite(m) ? m + std::log(s) : m;
  Tape* tape = tape_in(terms);
  if (tape == nullptr) {
    require_finite(v, -1);
    return Var(v);
  }
  Scratch partials(terms.size());
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::exp(logs[k] - m) / s;
    const double inv = terms[3 * k + 2].value();
    const double diff = u - terms[3 * k + 1].value();
    partials[3 * k] = w;
    partials[3 * k + 1] = w * zs[k] * inv;
    partials[3 * k + 2] = -w * zs[k] * diff;
  }
  return tape->nary(Op::gaussian_mix, terms, v, partials.view(terms.size()), u);
}

namespace {

/// Shared value and (optionally) partials of mixture_loglik.
double mixture_loglik_impl(std::span<const double> heads, std::span<const double> targets,
                           double lo, double hi, double* partials) {
  if (heads.empty() || heads.size() % 3 != 0) {
    throw InvalidInput("mixture_loglik needs M logits, M means and M log-scales");
  }
  const std::size_t m = heads.size() / 3;
  const double* logit = heads.data();
  const double* mean = heads.data() + m;
  const double* raw_scale = heads.data() + 2 * m;
  const double norm = log_sum_exp(std::span<const double>(logit, m));
  Scratch offset(m);
  Scratch inv(m);
  Scratch prior(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double log_pi = logit[k] - norm;
    const double s = std::clamp(raw_scale[k], lo, hi);
    prior[k] = std::exp(log_pi);
    inv[k] = std::exp(-s);
    offset[k] = log_pi - s - 0.91893853320467274178;
  }
  if (partials != nullptr) std::fill(partials, partials + heads.size(), 0.0);
  Scratch e(m);
  Scratch z(m);
  double total = 0.0;
  for (double u : targets) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      z[k] = (u - mean[k]) * inv[k];
      e[k] = offset[k] - 0.5 * (z[k] * z[k]);
      top = std::max(top, e[k]);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      e[k] = std::exp(e[k] - top);
      sum += e[k];
    }
    total += top + std::log(sum);
    if (partials != nullptr) {
      for (std::size_t k = 0; k < m; ++k) {
        const double r = e[k] / sum;
        partials[k] += r - prior[k];
        partials[m + k] += r * z[k] * inv[k];
        partials[2 * m + k] += r * (z[k] * z[k] - 1.0);
      }
    }
  }
  if (partials != nullptr) {
    for (std::size_t k = 0; k < m; ++k) {
      if (raw_scale[k] < lo || raw_scale[k] > hi) partials[2 * m + k] = 0.0;
    }
  }
  return total;
}

}  // namespace

double mixture_loglik(std::span<const double> heads, std::span<const double> targets, double lo,
                      double hi) {
  return mixture_loglik_impl(heads, targets, lo, hi, nullptr);
}

Var mixture_loglik(std::span<const Var> heads, std::span<const double> targets, double lo,
                   double hi) {
  Scratch values(heads.size());
  for (std::size_t k = 0; k < heads.size(); ++k) values[k] = heads[k].value();
  Tape* tape = tape_in(heads);
  if (tape == nullptr) {
    const double v = mixture_loglik_impl(values.view(heads.size()), targets, lo, hi, nullptr);
    require_finite(v, -1);
    return Var(v);
  }
  Scratch partials(heads.size());
  const double v = mixture_loglik_impl(values.view(heads.size()), targets, lo, hi, &partials[0]);
  const double bounds[2] = {lo, hi};
  const std::size_t offset = tape->store(bounds);
  tape->store(targets);
  return tape->nary(Op::mixture_loglik, heads, v, partials.view(heads.size()),
                    static_cast<double>(offset), static_cast<double>(targets.size() + 2));
}

}  // namespace pimdn::ad
