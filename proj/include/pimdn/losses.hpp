#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pimdn/autodiff.hpp"
#include "pimdn/dataset.hpp"
#include "pimdn/mdn.hpp"

namespace pimdn {

/// g: class c (1-based) -> mixture component (1-based).
struct ClassMap {
  std::vector<int> component_of_class;

  static ClassMap identity(int classes);
  int classes() const { return static_cast<int>(component_of_class.size()); }
  /// 0-based component for a 1-based class label.
  int component(int label) const;

  friend bool operator==(const ClassMap&, const ClassMap&) = default;
};

void validate(const ClassMap& g, int components);

enum class ClassMode { none, class_informed };

/// Component mean at x - h, x and x + h (target units) plus the stencil step.
template <typename Scalar>
struct Stencil {
  Scalar minus;
  Scalar center;
  Scalar plus;
  double x = 0.0;
  double step = 0.0;
};

enum class ResidualKind { monotonicity, chafee_steady_state, custom };

struct ResidualSpec {
  ResidualKind kind = ResidualKind::monotonicity;
  double step = 1e-2;  // stencil step in context units, > 0
  double nu = 0.16;    // diffusion coefficient of the steady-state residual
  /// Only for kind == custom; must return a nonnegative penalty.
  std::function<ad::Var(const Stencil<ad::Var>&)> custom;
};

void validate(const ResidualSpec& spec);
std::string to_string(ResidualKind kind);
ResidualKind residual_kind_from_string(const std::string& name);

/// Central-difference derivatives of a component mean.
template <typename Scalar>
Scalar first_derivative(const Stencil<Scalar>& s) {
  return (s.plus - s.minus) / (2.0 * s.step);
}

template <typename Scalar>
Scalar second_derivative(const Stencil<Scalar>& s) {
  return (s.plus - 2.0 * s.center + s.minus) / (s.step * s.step);
}

/// max(0, -d mu / dx): penalizes decreasing component means.
template <typename Scalar>
Scalar monotonicity_residual(const Stencil<Scalar>& s) {
  using ad::max0;
  return max0(-first_derivative(s));
}

/// (mu - mu^3 + nu mu'')^2: squared steady-state residual of u_t = u - u^3 + nu u_xx.
template <typename Scalar>
Scalar steady_state_residual(const Stencil<Scalar>& s, double nu) {
  using ad::square;
  const Scalar r = s.center - s.center * s.center * s.center + nu * second_derivative(s);
  return square(r);
}

ad::Var residual(const ResidualSpec& spec, const Stencil<ad::Var>& s);
double residual(const ResidualSpec& spec, const Stencil<double>& s);

/// Mean negative log-likelihood (target units) over the batch.
ad::Var nll(const MdnGraph& graph, const Dataset& batch);

/// Mean of -log(pi_g(c) phi_g(c)); every record must carry a label.
ad::Var class_nll(const MdnGraph& graph, const Dataset& batch, const ClassMap& g);

/// Central-difference d^order mu_m / dx^order at x (order 1 or 2), every
/// stencil point being a network evaluation in `graph`.
ad::Var input_derivative(const MdnGraph& graph, double x, int component, int order, double h);

/// Mean over collocation points of sum_m pi_m(x) R(mu_m; x).
ad::Var physics_loss(const MdnGraph& graph, std::span<const double> collocation,
                     const ResidualSpec& spec);

struct LossTerms {
  ad::Var nll;
  ad::Var physics;
  ad::Var total;
};

/// Everything a batch needs to build its losses.
struct LossSetup {
  std::optional<ResidualSpec> residual;
  std::vector<double> collocation;
  double lambda = 1.0;
  ClassMode class_mode = ClassMode::none;
  ClassMap class_map;
};

/// (nll or class-informed nll) + lambda * physics. In class-informed mode
/// labeled records use the class term and unlabeled ones the full mixture.
LossTerms total_loss(const MdnGraph& graph, const Dataset& batch, const LossSetup& setup);

/// Training contexts plus `grid_points` equispaced points over their range, deduplicated.
std::vector<double> default_collocation(const Dataset& data, int grid_points = 256);

/// Contexts x, x - h and x + h for every collocation point.
std::vector<double> stencil_contexts(std::span<const double> collocation, double step);

namespace detail {

/// A record resolved against a graph's context list.
struct LossPoint {
  std::uint32_t context;
  int component;  // 0-based class component, -1 for the full mixture
  double target;
};

}  // namespace detail

/// Loss construction with all context lookups resolved once, for training loops.
class Objective {
 public:
  Objective(const Dataset& batch, LossSetup setup);

  /// Unique contexts the graph must be built on, in this order.
  std::span<const double> contexts() const { return contexts_; }
  LossTerms build(const MdnGraph& graph) const;

 private:
  LossSetup setup_;
  std::vector<double> contexts_;
  std::vector<detail::LossPoint> points_;
  std::vector<std::array<std::uint32_t, 3>> stencils_;  // minus, center, plus
};

}  // namespace pimdn
