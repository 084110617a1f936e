#pragma once

#include <span>
#include <vector>

#include "pimdn/losses.hpp"
#include "pimdn/mdn.hpp"
#include "pimdn/problems.hpp"

namespace pimdn {

/// Trapezoid integral of |p - q|. Grids must be identical.
double density_l1(const DensityCurve& p, const DensityCurve& q);

struct ModelDensity {
  DensityCurve curve;
  double raw_integral = 0.0;
  bool renormalized = false;  // raw integral was off by more than 1e-3
};

ModelDensity mdn_density_curve(const MdnModel& model, double context,
                               std::span<const double> grid);

struct Mode {
  double pi;
  double mu;
  double sigma;
};

struct ModeReport {
  double context = 0.0;
  double threshold = 0.05;
  std::vector<Mode> modes;  // pi >= threshold, ascending mu
  /// Filled by match_modes(): per oracle root, the nearest mode and its distance.
  std::vector<double> oracle;
  std::vector<std::size_t> nearest;
  std::vector<double> error;

  double max_error() const;
  /// One mode per root, each root matched to a different mode.
  bool one_to_one() const;
};

ModeReport extract_modes(const MdnModel& model, double context, double threshold = 0.05);

/// Nearest-neighbour assignment of oracle roots to reported modes.
void match_modes(ModeReport& report, std::span<const double> roots);

/// Mean over grid points of sum_m pi_m R(mu_m; x), stencils in context units.
double physics_violation(const MdnModel& model, std::span<const double> grid,
                         const ResidualSpec& spec);

/// physics_violation with the monotonicity residual and step h.
double monotonicity_violation(const MdnModel& model, std::span<const double> grid, double h);

struct Interval {
  double lo;
  double hi;
};

/// Fraction of samples inside [lo, hi]; 0 for no samples.
double inter_mode_mass(std::span<const double> samples, Interval window);
/// Fraction inside the union of disjoint windows.
double inter_mode_mass(std::span<const double> samples, std::span<const Interval> windows);

/// Windows between consecutive roots with `gap` removed on each side.
std::vector<Interval> inter_root_windows(std::span<const double> roots, double gap);

/// Density histogram on bins centered at the (uniform) grid points; samples
/// outside the outer bin edges are counted in the normalization only.
DensityCurve histogram_density(std::span<const double> samples, std::span<const double> grid);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::span<const double> a, std::span<const double> b);

}  // namespace pimdn

namespace pimdn {

/// RMSE of component `m`'s mean against a branch line over `points`
/// equispaced Up values of the branch range.
double branch_rmse(const MdnModel& model, int component, const HugoniotBranch& branch,
                   int points = 50);

/// Injective branch -> component assignment minimizing the summed RMSE.
std::vector<int> best_assignment(const MdnModel& model, std::span<const HugoniotBranch> branches,
                                 int points = 50);

/// Components whose weight stays below `threshold` at every context.
int suppressed_components(const MdnModel& model, std::span<const double> contexts,
                          double threshold = 0.05);

}  // namespace pimdn

namespace pimdn {

/// Mean over contexts of the weight-averaged component standard deviation, sum_m pi_m sigma_m.
double mean_sigma(const MdnModel& model, std::span<const double> contexts);

}  // namespace pimdn
