#include "pimdn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pimdn/errors.hpp"

namespace pimdn {

double density_l1(const DensityCurve& p, const DensityCurve& q) {
  if (p.grid != q.grid || p.density.size() != p.grid.size() ||
      q.density.size() != q.grid.size()) {
    throw GridMismatch();
  }
  std::vector<double> diff(p.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = std::abs(p.density[i] - q.density[i]);
  return trapezoid(p.grid, diff);
}

ModelDensity mdn_density_curve(const MdnModel& model, double context,
                               std::span<const double> grid) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw InvalidInput("density grid must be strictly increasing");
  }
  const MixtureParams mp = mdn_forward(model, context);
  ModelDensity out;
  out.curve.grid.assign(grid.begin(), grid.end());
  out.curve.u1 = context;
  out.curve.density.reserve(grid.size());
  for (double u : grid) out.curve.density.push_back(pdf(mp, u));
  out.raw_integral = trapezoid(out.curve.grid, out.curve.density);
  if (std::abs(out.raw_integral - 1.0) > 1e-3 && out.raw_integral > 0.0) {
    out.renormalized = true;
    for (double& d : out.curve.density) d /= out.raw_integral;
  }
  return out;
}

double ModeReport::max_error() const {
  double e = 0.0;
  for (double v : error) e = std::max(e, v);
  return e;
}

bool ModeReport::one_to_one() const {
  if (oracle.size() != modes.size()) return false;
  std::vector<bool> used(modes.size(), false);
  for (std::size_t j : nearest) {
    if (j >= used.size() || used[j]) return false;
    used[j] = true;
  }
  return true;
}

ModeReport extract_modes(const MdnModel& model, double context, double threshold) {
  const MixtureParams mp = mdn_forward(model, context);
  ModeReport r;
  r.context = context;
  r.threshold = threshold;
  for (Eigen::Index m = 0; m < mp.components(); ++m) {
    if (mp.pi[m] >= threshold) r.modes.push_back({mp.pi[m], mp.mu[m], mp.sigma[m]});
  }
  std::stable_sort(r.modes.begin(), r.modes.end(),
                   [](const Mode& a, const Mode& b) { return a.mu < b.mu; });
  return r;
}

void match_modes(ModeReport& report, std::span<const double> roots) {
  report.oracle.assign(roots.begin(), roots.end());
  report.nearest.clear();
  report.error.clear();
  for (double root : roots) {
    std::size_t best = report.modes.size();
    double err = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < report.modes.size(); ++j) {
      const double d = std::abs(report.modes[j].mu - root);
      if (d < err) {
        err = d;
        best = j;
      }
    }
    report.nearest.push_back(best);
    report.error.push_back(err);
  }
}

double physics_violation(const MdnModel& model, std::span<const double> grid,
                         const ResidualSpec& spec) {
  validate(spec);
  if (grid.empty()) return 0.0;
  const std::vector<double> xs = stencil_contexts(grid, spec.step);
  const std::vector<MixtureParams> mps = mdn_forward_batch(model, xs);
  double total = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const MixtureParams& lo = mps[3 * k];
    const MixtureParams& mid = mps[3 * k + 1];
    const MixtureParams& hi = mps[3 * k + 2];
    for (Eigen::Index m = 0; m < mid.components(); ++m) {
      const Stencil<double> s{lo.mu[m], mid.mu[m], hi.mu[m], grid[k], spec.step};
      total += mid.pi[m] * residual(spec, s);
    }
  }
  return total / static_cast<double>(grid.size());
}

double monotonicity_violation(const MdnModel& model, std::span<const double> grid, double h) {
  ResidualSpec spec;
  spec.kind = ResidualKind::monotonicity;
  spec.step = h;
  return physics_violation(model, grid, spec);
}

double inter_mode_mass(std::span<const double> samples, Interval window) {
  return inter_mode_mass(samples, std::span<const Interval>(&window, 1));
}

double inter_mode_mass(std::span<const double> samples, std::span<const Interval> windows) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (double s : samples) {
    for (const Interval& w : windows) {
      if (s >= w.lo && s <= w.hi) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

std::vector<Interval> inter_root_windows(std::span<const double> roots, double gap) {
  std::vector<Interval> out;
  for (std::size_t k = 1; k < roots.size(); ++k) {
    const Interval w{roots[k - 1] + gap, roots[k] - gap};
    if (w.lo < w.hi) out.push_back(w);
  }
  return out;
}

DensityCurve histogram_density(std::span<const double> samples, std::span<const double> grid) {
  if (grid.size() < 2) throw InvalidInput("histogram grid needs at least two points");
  const double width = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  const double left = grid.front() - 0.5 * width;
  DensityCurve out;
  out.grid.assign(grid.begin(), grid.end());
  out.density.assign(grid.size(), 0.0);
  for (double s : samples) {
    const double pos = std::floor((s - left) / width);
    if (pos >= 0.0 && pos < static_cast<double>(grid.size())) {
      out.density[static_cast<std::size_t>(pos)] += 1.0;
    }
  }
  if (!samples.empty()) {
    for (double& d : out.density) d /= static_cast<double>(samples.size()) * width;
  }
  return out;
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidInput("KS statistic needs two nonempty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

}  // namespace pimdn

namespace pimdn {

double branch_rmse(const MdnModel& model, int component, const HugoniotBranch& branch,
                   int points) {
  const std::vector<double> ups =
      linspace(branch.up_lo, branch.up_hi, static_cast<std::size_t>(points));
  const std::vector<MixtureParams> mps = mdn_forward_batch(model, ups);
  double s = 0.0;
  for (std::size_t k = 0; k < ups.size(); ++k) {
    const double d = mps[k].mu[component] - branch.us(ups[k]);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(ups.size()));
}

std::vector<int> best_assignment(const MdnModel& model, std::span<const HugoniotBranch> branches,
                                 int points) {
  const int m = model.arch.components;
  const int b = static_cast<int>(branches.size());
  if (b > m) throw InvalidInput("more branches than mixture components");
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(b));
  for (int k = 0; k < b; ++k) {
    for (int c = 0; c < m; ++c) {
      cost[static_cast<std::size_t>(k)].push_back(branch_rmse(model, c, branches[static_cast<std::size_t>(k)], points));
    }
  }
  std::vector<int> comps(static_cast<std::size_t>(m));
  for (int c = 0; c < m; ++c) comps[static_cast<std::size_t>(c)] = c;
  std::vector<int> best;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int k = 0; k < b; ++k) {
      total += cost[static_cast<std::size_t>(k)][static_cast<std::size_t>(comps[static_cast<std::size_t>(k)])];
    }
    if (total < best_cost) {
      best_cost = total;
      best.assign(comps.begin(), comps.begin() + b);
    }
  } while (std::next_permutation(comps.begin(), comps.end()));
  return best;
}

int suppressed_components(const MdnModel& model, std::span<const double> contexts,
                          double threshold) {
  const std::vector<MixtureParams> mps = mdn_forward_batch(model, contexts);
  int count = 0;
  for (int m = 0; m < model.arch.components; ++m) {
    bool low = true;
    for (const MixtureParams& mp : mps) low = low && mp.pi[m] < threshold;
    if (low && !mps.empty()) ++count;
  }
  return count;
}

}  // namespace pimdn

namespace pimdn {

double mean_sigma(const MdnModel& model, std::span<const double> contexts) {
  if (contexts.empty()) return 0.0;
  double s = 0.0;
  for (const MixtureParams& mp : mdn_forward_batch(model, contexts)) s += mp.pi.dot(mp.sigma);
  return s / static_cast<double>(contexts.size());
}

}  // namespace pimdn
