#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pimdn/dataset.hpp"

namespace pimdn {

/// Trapezoid rule on a (possibly nonuniform) grid.
double trapezoid(std::span<const double> x, std::span<const double> y);

/// `n` equispaced points from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t n);

// ---------------------------------------------------------------- cusp bifurcation

struct BifurcationConfig {
  double state_lo = -2.0;
  double state_hi = 2.0;
  double control_lo = -2.5;
  double control_hi = 2.5;
  double imperfection_bound = 0.05;
};

/// Rejection sampling of steady states of x' = -x^3 + lambda x + mu with
/// |mu| < bound, mu = x^3 - lambda x. Context = lambda, target = x.
/// metadata["proposals"] holds the number of (x, lambda) draws.
Dataset gen_bifurcation(std::size_t n, std::uint64_t seed, const BifurcationConfig& config = {});

/// x^3 - lambda x imperfection of a (lambda, x) pair.
inline double imperfection(double lambda, double x) { return x * x * x - lambda * x; }

/// Real roots of x^3 - lambda x = 0, ascending.
std::vector<double> bifurcation_roots(double lambda);

/// Probability that one proposal is accepted, by quadrature over x of the
/// admissible lambda interval.
double bifurcation_acceptance_rate(const BifurcationConfig& config = {});

// ---------------------------------------------------------------- multiscale SDE

struct SdeParams {
  double a1 = 1e-3;
  double a2 = 1e-2;
  double a3 = 1.0;
  double dt = 1e-3;
  long steps = 10'000'000;
  double u1_0 = 0.0;
  double u2_0 = 0.0;
};

/// Drift of the fast variable: -(-1 + 0.2 u1 + 4 u2 (u2^2 - 1)).
inline double sde_drift(double u2, double u1) {
  return -(-1.0 + 0.2 * u1 + 4.0 * u2 * (u2 * u2 - 1.0));
}

/// States at t_i = i dt, i = 0..steps.
struct SdeTrajectory {
  SdeParams params;
  std::vector<double> u1;
  std::vector<double> u2;

  std::size_t size() const { return u1.size(); }
  double time(std::size_t i) const { return static_cast<double>(i) * params.dt; }
};

/// Euler-Maruyama. The slow variable is advanced as
/// u1_0 + a1 t_i + a2 W_i with W the running sum of sqrt(dt) z1, which is the
/// same scheme without drift round-off accumulating.
SdeTrajectory simulate_sde(const SdeParams& params, std::uint64_t seed);

/// u2 grid with density values of the fast variable at frozen u1.
struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double u1 = 0.0;
  double a3 = 1.0;

  std::size_t size() const { return grid.size(); }
};

/// exp(-(2/a3^2)((u2^2 - 1)^2 + (0.2 u1 - 1) u2)), normalized by the trapezoid rule.
DensityCurve stationary_density(double u1, double a3, std::span<const double> grid);

using DriftFn = std::function<double(double u2, double u1)>;

/// Rule for the running integral of the drift between grid points.
enum class Quadrature {
  trapezoid,
  simpson,  // extra drift evaluation at each interval midpoint
};

/// exp((2/a3^2) * running integral of b), normalized by the trapezoid rule.
/// With check_tails the grid must let the density decay below 1e-10 of its
/// peak at both ends.
DensityCurve stationary_density_generic(const DriftFn& drift, double u1, double a3,
                                        std::span<const double> grid, bool check_tails = true,
                                        Quadrature rule = Quadrature::simpson);

/// Uniform subsample without replacement of (u1, u2) pairs, in draw order.
Dataset gen_sde_dataset(const SdeTrajectory& traj, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------- Chafee-Infante

struct ChafeeParams {
  double nu = 0.16;
  double t_end = 4.5;
  int nx = 64;  // interior points
  double dt = 1e-3;
};

struct ChafeeProfile {
  std::vector<double> x;  // nx + 2 points on [0, pi], boundaries included
  std::vector<double> u;
  std::array<double, 3> coeffs{};
  ChafeeParams params;

  double spacing() const;
};

/// u_t = u - u^3 + nu u_xx on [0, pi], u = 0 at both ends, from
/// u(x, 0) = sum_n a_n sin(n x). Central Laplacian, RK4 in time.
ChafeeProfile solve_chafee(const ChafeeParams& params, const std::array<double, 3>& coeffs);

/// Discrete u - u^3 + nu u_xx at interior points.
std::vector<double> chafee_residual(const ChafeeProfile& profile);

/// Pooled (x, u) records of `profiles` solutions with a_n ~ N(0, 1).
Dataset gen_chafee_dataset(int profiles, const ChafeeParams& params, std::uint64_t seed);

// ---------------------------------------------------------------- shock Hugoniot

enum class Regime { elastic = 1, plastic = 2, phase_transformation = 3 };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& name);

/// CSV `up_km_s,us_km_s,regime`; context = Up, target = Us, label = regime id.
Dataset read_hugoniot_csv(std::istream& in);
Dataset load_hugoniot(const std::filesystem::path& path);
void write_hugoniot_csv(std::ostream& out, const Dataset& data);
void save_hugoniot(const std::filesystem::path& path, const Dataset& data);

struct HugoniotBranch {
  double intercept;  // km/s
  double slope;      // >= 0
  double up_lo;
  double up_hi;

  double us(double up) const { return intercept + slope * up; }
};

struct HugoniotSurrogate {
  int n_per_regime = 30;
  double scatter = 0.15;  // km/s
  std::array<HugoniotBranch, 3> branches{{
      {12.0, 0.6, 0.0, 2.5},  // elastic
      {9.0, 0.9, 1.0, 3.5},   // plastic
      {7.0, 1.4, 2.0, 5.0},   // phase transformation
  }};
};

Dataset gen_hugoniot_surrogate(const HugoniotSurrogate& config, std::uint64_t seed);

// ---------------------------------------------------------------- circle

struct CircleConfig {
  int n = 400;
  double r_in = 0.35;
  double r_out = 0.5;
  double cx = 0.5;
  double cy = 0.5;
};

/// Annulus points uniform in area; context = x coordinate, target = y.
Dataset gen_circle(const CircleConfig& config, std::uint64_t seed);

}  // namespace pimdn
