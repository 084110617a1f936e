#include "pimdn/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/Core>

#include "pimdn/errors.hpp"
#include "pimdn/random.hpp"

namespace pimdn {

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("trapezoid: grid and values differ in length");
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
  if (n > 1) out.back() = hi;
  return out;
}

// ---------------------------------------------------------------- cusp bifurcation

Dataset gen_bifurcation(std::size_t n, std::uint64_t seed, const BifurcationConfig& config) {
  if (n < 1) throw InvalidInput("bifurcation dataset needs at least one point");
  Rng rng = Rng::stream(seed, streams::data);
  Dataset data;
  data.context.reserve(n);
  data.target.reserve(n);
  long proposals = 0;
  while (data.size() < n) {
    const double x = rng.uniform(config.state_lo, config.state_hi);
    const double lambda = rng.uniform(config.control_lo, config.control_hi);
    ++proposals;
    if (std::abs(imperfection(lambda, x)) < config.imperfection_bound) {
      data.context.push_back(lambda);
      data.target.push_back(x);
    }
  }
  data.metadata = {{"problem", "bifurcation"},
                   {"seed", seed},
                   {"n", n},
                   {"proposals", proposals},
                   {"imperfection_bound", config.imperfection_bound}};
  return data;
}

std::vector<double> bifurcation_roots(double lambda) {
  if (lambda <= 0.0) return {0.0};
  const double r = std::sqrt(lambda);
  return {-r, 0.0, r};
}

double bifurcation_acceptance_rate(const BifurcationConfig& c) {
  const double b = c.imperfection_bound;
  auto admissible = [&](double x) {
    const double ax = std::abs(x);
    if (ax == 0.0) return c.control_hi - c.control_lo;
    const double lo = std::max(c.control_lo, x * x - b / ax);
    const double hi = std::min(c.control_hi, x * x + b / ax);
    return std::max(0.0, hi - lo);
  };
  const std::size_t n = 2'000'001;
  const auto xs = linspace(c.state_lo, c.state_hi, n);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = admissible(xs[i]);
  return trapezoid(xs, ys) / ((c.state_hi - c.state_lo) * (c.control_hi - c.control_lo));
}

// ---------------------------------------------------------------- multiscale SDE

SdeTrajectory simulate_sde(const SdeParams& p, std::uint64_t seed) {
  if (!(p.dt > 0.0)) throw InvalidConfig("SDE time step must be positive");
  if (p.steps < 0) throw InvalidConfig("SDE step count must be nonnegative");
  SdeTrajectory traj;
  traj.params = p;
  const auto n = static_cast<std::size_t>(p.steps) + 1;
  traj.u1.resize(n);
  traj.u2.resize(n);
  Rng rng = Rng::stream(seed, streams::data);
  const double sq = std::sqrt(p.dt);
  double w = 0.0;
  double u1 = p.u1_0;
  double u2 = p.u2_0;
  traj.u1[0] = u1;
  traj.u2[0] = u2;
  for (std::size_t i = 1; i < n; ++i) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    u2 += sde_drift(u2, u1) * p.dt + p.a3 * sq * z2;
    w += sq * z1;
    u1 = p.u1_0 + p.a1 * (static_cast<double>(i) * p.dt) + p.a2 * w;
    if (!std::isfinite(u1) || !std::isfinite(u2)) throw SimulationDiverged(static_cast<long>(i));
    traj.u1[i] = u1;
    traj.u2[i] = u2;
  }
  return traj;
}

namespace {

void check_grid(std::span<const double> grid) {
  if (grid.size() < 2) throw InvalidInput("density grid needs at least two points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw InvalidInput("density grid must be strictly increasing");
  }
}

DensityCurve normalize(std::vector<double> exponent, double u1, double a3,
                       std::span<const double> grid, bool check_tails) {
  const double peak = *std::max_element(exponent.begin(), exponent.end());
  DensityCurve curve;
  curve.grid.assign(grid.begin(), grid.end());
  curve.u1 = u1;
  curve.a3 = a3;
  curve.density.resize(exponent.size());
  for (std::size_t i = 0; i < exponent.size(); ++i) curve.density[i] = std::exp(exponent[i] - peak);
  if (check_tails && std::max(curve.density.front(), curve.density.back()) > 1e-10) {
    throw GridTooNarrow("density grid does not cover the tails (boundary value " +
                        format_double(std::max(curve.density.front(), curve.density.back())) +
                        " of peak)");
  }
  const double z = trapezoid(curve.grid, curve.density);
  for (double& d : curve.density) d /= z;
  return curve;
}

}  // namespace

DensityCurve stationary_density(double u1, double a3, std::span<const double> grid) {
  if (!(a3 > 0.0)) throw InvalidInput("noise amplitude must be positive");
  check_grid(grid);
  if (grid.front() > -3.0 || grid.back() < 3.0) {
    throw GridTooNarrow("stationary density grid must span at least [-3, 3]");
  }
  std::vector<double> exponent(grid.size());
  const double scale = 2.0 / (a3 * a3);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double s = grid[i];
    const double well = s * s - 1.0;
    exponent[i] = -scale * (well * well + (0.2 * u1 - 1.0) * s);
  }
  return normalize(std::move(exponent), u1, a3, grid, true);
}

DensityCurve stationary_density_generic(const DriftFn& drift, double u1, double a3,
                                        std::span<const double> grid, bool check_tails,
                                        Quadrature rule) {
  if (!(a3 > 0.0)) throw InvalidInput("noise amplitude must be positive");
  check_grid(grid);
  std::vector<double> exponent(grid.size());
  const double scale = 2.0 / (a3 * a3);
  double integral = 0.0;
  double prev = drift(grid[0], u1);
  exponent[0] = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur = drift(grid[i], u1);
    const double width = grid[i] - grid[i - 1];
    if (rule == Quadrature::simpson) {
      const double mid = drift(0.5 * (grid[i] + grid[i - 1]), u1);
      integral += width / 6.0 * (prev + 4.0 * mid + cur);
    } else {
      integral += 0.5 * width * (cur + prev);
    }
    exponent[i] = scale * integral;
    prev = cur;
  }
  return normalize(std::move(exponent), u1, a3, grid, check_tails);
}

Dataset gen_sde_dataset(const SdeTrajectory& traj, std::size_t n, std::uint64_t seed) {
  const std::size_t total = traj.size();
  if (n > total) {
    throw InvalidInput("cannot subsample " + std::to_string(n) + " points from a trajectory of " +
                       std::to_string(total));
  }
  if (total > 0xFFFFFFFFull) throw InvalidInput("trajectory too long to subsample");
  std::vector<std::uint32_t> index(total);
  for (std::size_t i = 0; i < total; ++i) index[i] = static_cast<std::uint32_t>(i);
  Rng rng = Rng::stream(seed, streams::subsample);
  Dataset data;
  data.context.reserve(n);
  data.target.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(total - k));
    std::swap(index[k], index[j]);
    data.context.push_back(traj.u1[index[k]]);
    data.target.push_back(traj.u2[index[k]]);
  }
  const SdeParams& p = traj.params;
  data.metadata = {{"problem", "sde"}, {"seed", seed},  {"n", n},
                   {"a1", p.a1},       {"a2", p.a2},    {"a3", p.a3},
                   {"dt", p.dt},       {"steps", p.steps}, {"u1_0", p.u1_0},
                   {"u2_0", p.u2_0}};
  return data;
}

// ---------------------------------------------------------------- Chafee-Infante

double ChafeeProfile::spacing() const { return std::numbers::pi / (params.nx + 1); }

ChafeeProfile solve_chafee(const ChafeeParams& p, const std::array<double, 3>& coeffs) {
  if (p.nx < 1) throw InvalidConfig("Chafee grid needs at least one interior point");
  if (!(p.t_end > 0.0)) throw InvalidConfig("Chafee end time must be positive");
  if (!(p.dt > 0.0)) throw InvalidConfig("Chafee time step must be positive");
  if (!(p.nu >= 0.0)) throw InvalidConfig("diffusion coefficient must be nonnegative");
  const double h = std::numbers::pi / (p.nx + 1);
  if (p.nu > 0.0 && p.dt > 0.9 * h * h / (2.0 * p.nu)) {
    throw UnstableTimestep("time step " + format_double(p.dt) + " exceeds the explicit limit " +
                           format_double(0.9 * h * h / (2.0 * p.nu)));
  }
  const Eigen::Index n = p.nx;
  ChafeeProfile out;
  out.params = p;
  out.coeffs = coeffs;
  out.x = linspace(0.0, std::numbers::pi, static_cast<std::size_t>(n) + 2);

  Eigen::ArrayXd u(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double x = out.x[static_cast<std::size_t>(j) + 1];
    u[j] = coeffs[0] * std::sin(x) + coeffs[1] * std::sin(2.0 * x) + coeffs[2] * std::sin(3.0 * x);
  }
  const double diff = p.nu / (h * h);
  auto rhs = [&](const Eigen::ArrayXd& v) {
    Eigen::ArrayXd lap(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double left = j > 0 ? v[j - 1] : 0.0;
      const double right = j + 1 < n ? v[j + 1] : 0.0;
      lap[j] = left - 2.0 * v[j] + right;
    }
    return Eigen::ArrayXd(v - v * v * v + diff * lap);
  };

  const long steps = std::max(1L, static_cast<long>(std::ceil(p.t_end / p.dt - 1e-9)));
  const double dt = p.t_end / static_cast<double>(steps);
  for (long s = 0; s < steps; ++s) {
    const Eigen::ArrayXd k1 = rhs(u);
    const Eigen::ArrayXd k2 = rhs(u + 0.5 * dt * k1);
    const Eigen::ArrayXd k3 = rhs(u + 0.5 * dt * k2);
    const Eigen::ArrayXd k4 = rhs(u + dt * k3);
    u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!u.allFinite()) throw SimulationDiverged(s + 1);
  }
  out.u.assign(static_cast<std::size_t>(n) + 2, 0.0);
  for (Eigen::Index j = 0; j < n; ++j) out.u[static_cast<std::size_t>(j) + 1] = u[j];
  return out;
}

std::vector<double> chafee_residual(const ChafeeProfile& profile) {
  const double h = profile.spacing();
  const double nu = profile.params.nu;
  std::vector<double> r;
  for (std::size_t j = 1; j + 1 < profile.u.size(); ++j) {
    const double u = profile.u[j];
    const double lap = (profile.u[j - 1] - 2.0 * u + profile.u[j + 1]) / (h * h);
    r.push_back(u - u * u * u + nu * lap);
  }
  return r;
}

Dataset gen_chafee_dataset(int profiles, const ChafeeParams& params, std::uint64_t seed) {
  if (profiles < 1) throw InvalidInput("Chafee dataset needs at least one profile");
  Dataset data;
  nlohmann::json coeffs = nlohmann::json::array();
  const std::uint64_t base = child_seed(seed, streams::data);
  for (int k = 0; k < profiles; ++k) {
    Rng rng = Rng::stream(base, static_cast<std::uint64_t>(k));
    std::array<double, 3> a{};
    for (double& c : a) c = rng.normal();
    const ChafeeProfile prof = solve_chafee(params, a);
    data.context.insert(data.context.end(), prof.x.begin(), prof.x.end());
    data.target.insert(data.target.end(), prof.u.begin(), prof.u.end());
    coeffs.push_back(a);
  }
  data.metadata = {{"problem", "chafee"},  {"seed", seed},          {"profiles", profiles},
                   {"nu", params.nu},      {"t_end", params.t_end}, {"nx", params.nx},
                   {"dt", params.dt},      {"coefficients", coeffs}};
  return data;
}

// ---------------------------------------------------------------- shock Hugoniot

std::string to_string(Regime r) {
  switch (r) {
    case Regime::elastic:
      return "elastic";
    case Regime::plastic:
      return "plastic";
    case Regime::phase_transformation:
      return "phase_transformation";
  }
  throw InvalidInput("unknown regime");
}

Regime regime_from_string(const std::string& name) {
  if (name == "elastic") return Regime::elastic;
  if (name == "plastic") return Regime::plastic;
  if (name == "phase_transformation") return Regime::phase_transformation;
  throw InvalidInput("unknown regime '" + name + "'");
}

Dataset read_hugoniot_csv(std::istream& in) {
  Dataset data;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "up_km_s,us_km_s,regime") throw ParseError(1, "unexpected header '" + line + "'");
  data.label.clear();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != 3) throw ParseError(line_no, "expected 3 fields");
    const double up = detail::parse_double(fields[0], line_no);
    const double us = detail::parse_double(fields[1], line_no);
    Regime r;
    try {
      r = regime_from_string(std::string(fields[2]));
    } catch (const InvalidInput&) {
      throw ParseError(line_no, "unknown regime '" + std::string(fields[2]) + "'");
    }
    if (!(up >= 0.0)) throw ParseError(line_no, "particle velocity must be nonnegative");
    if (!(us > 0.0)) throw ParseError(line_no, "shock velocity must be positive");
    data.context.push_back(up);
    data.target.push_back(us);
    data.label.push_back(static_cast<int>(r));
  }
  data.metadata = {{"problem", "shock"}};
  return data;
}

Dataset load_hugoniot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Dataset data = read_hugoniot_csv(in);
  data.metadata["source"] = path.string();
  return data;
}

void write_hugoniot_csv(std::ostream& out, const Dataset& data) {
  validate(data);
  if (data.size() > 0 && !data.fully_labeled()) {
    throw InvalidInput("every Hugoniot record needs a regime label");
  }
  out << "up_km_s,us_km_s,regime\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_double(data.context[i]) << ',' << format_double(data.target[i]) << ','
        << to_string(static_cast<Regime>(data.label[i])) << '\n';
  }
}

void save_hugoniot(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_hugoniot_csv(out, data);
}

Dataset gen_hugoniot_surrogate(const HugoniotSurrogate& config, std::uint64_t seed) {
  if (config.n_per_regime < 0) throw InvalidInput("n_per_regime must be nonnegative");
  if (config.scatter < 0.0) throw InvalidInput("scatter must be nonnegative");
  Rng rng = Rng::stream(seed, streams::data);
  Dataset data;
  nlohmann::json branches = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    const HugoniotBranch& b = config.branches[static_cast<std::size_t>(r)];
    if (b.slope < 0.0) throw InvalidConfig("Hugoniot branch slopes must be nonnegative");
    for (int i = 0; i < config.n_per_regime; ++i) {
      const double up = rng.uniform(b.up_lo, b.up_hi);
      const double noise = rng.normal();
      data.context.push_back(up);
      data.target.push_back(b.us(up) + config.scatter * noise);
      data.label.push_back(r + 1);
    }
    branches.push_back({{"regime", to_string(static_cast<Regime>(r + 1))},
                        {"intercept", b.intercept},
                        {"slope", b.slope},
                        {"up_lo", b.up_lo},
                        {"up_hi", b.up_hi}});
  }
  data.metadata = {{"problem", "shock"},
                   {"seed", seed},
                   {"n_per_regime", config.n_per_regime},
                   {"scatter", config.scatter},
                   {"branches", branches}};
  return data;
}

// ---------------------------------------------------------------- circle

Dataset gen_circle(const CircleConfig& c, std::uint64_t seed) {
  if (c.n < 0) throw InvalidInput("circle point count must be nonnegative");
  if (!(c.r_in >= 0.0 && c.r_out > c.r_in)) throw InvalidInput("need 0 <= r_in < r_out");
  Rng rng = Rng::stream(seed, streams::data);
  Dataset data;
  for (int i = 0; i < c.n; ++i) {
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    const double r = std::sqrt(c.r_in * c.r_in + rng.uniform() * (c.r_out * c.r_out - c.r_in * c.r_in));
    data.context.push_back(c.cx + r * std::cos(theta));
    data.target.push_back(c.cy + r * std::sin(theta));
  }
  data.metadata = {{"problem", "circle"}, {"seed", seed}, {"n", c.n},
                   {"r_in", c.r_in},      {"r_out", c.r_out}};
  return data;
}

}  // namespace pimdn
