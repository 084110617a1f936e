#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "helpers.hpp"
#include "pimdn/errors.hpp"
#include "pimdn/eval.hpp"
#include "pimdn/random.hpp"

using namespace pimdn;

namespace {

DensityCurve curve(const std::vector<double>& grid, const std::function<double(double)>& f) {
  DensityCurve c;
  c.grid = grid;
  for (double u : grid) c.density.push_back(f(u));
  return c;
}

double normal_pdf(double u, double m) {
  return std::exp(-0.5 * (u - m) * (u - m)) / std::sqrt(2 * std::numbers::pi);
}

}  // namespace

TEST_CASE("density distance examples") {
  const std::vector<double> grid = linspace(-10, 11, 210001);
  const DensityCurve p = curve(grid, [](double u) { return normal_pdf(u, 0.0); });
  const DensityCurve q = curve(grid, [](double u) { return normal_pdf(u, 1.0); });
  CHECK(density_l1(p, p) == 0.0);
  // 2 (2 Phi(1/2) - 1)
  CHECK(density_l1(p, q) == doctest::Approx(2 * std::erf(0.25 * std::sqrt(2.0))).epsilon(1e-6));

  const std::vector<double> box_grid = linspace(0, 2, 20001);
  const DensityCurve left = curve(box_grid, [](double u) { return u <= 1.0 ? 1.0 : 0.0; });
  const DensityCurve right = curve(box_grid, [](double u) { return u >= 1.0 ? 1.0 : 0.0; });
  CHECK(density_l1(left, right) == doctest::Approx(2.0).epsilon(1e-3));

  DensityCurve other = q;
  other.grid[5] += 1e-9;
  CHECK_THROWS_AS(density_l1(p, other), GridMismatch);
}

TEST_CASE("density distance is a metric") {
  Rng rng(1);
  const std::vector<double> grid = linspace(-1, 1, 101);
  for (int trial = 0; trial < 100; ++trial) {
    DensityCurve c[3];
    for (auto& x : c) x = curve(grid, [&](double) { return rng.uniform(); });
    CHECK(density_l1(c[0], c[1]) == density_l1(c[1], c[0]));
    CHECK(density_l1(c[0], c[2]) <= density_l1(c[0], c[1]) + density_l1(c[1], c[2]) + 1e-12);
    CHECK(density_l1(c[0], c[1]) >= 0.0);
  }
}

TEST_CASE("model density curve") {
  const std::vector<double> grid = linspace(-8, 8, 1601);
  const ModelDensity zero = mdn_density_curve(testing::zero_mdn(3), 0.4, grid);
  CHECK_FALSE(zero.renormalized);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(zero.curve.density[i] == doctest::Approx(normal_pdf(grid[i], 0.0)).epsilon(1e-12));
  }
  const ModelDensity narrow = mdn_density_curve(testing::zero_mdn(1), 0.0, linspace(-1, 1, 201));
  CHECK(narrow.renormalized);
  CHECK(trapezoid(narrow.curve.grid, narrow.curve.density) == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(2);
  Architecture a;
  a.components = 3;
  const MdnModel model = init_params(a, 6);
  for (double x : {-1.0, 0.5}) {
    const MixtureParams mp = mdn_forward(model, x);
    double lo = 0, hi = 0;
    for (Eigen::Index k = 0; k < 3; ++k) {
      lo = std::min(lo, mp.mu[k] - 6 * mp.sigma[k]);
      hi = std::max(hi, mp.mu[k] + 6 * mp.sigma[k]);
    }
    const std::vector<double> g = linspace(lo, hi, 4001);
    const ModelDensity d = mdn_density_curve(model, x, g);
    CHECK_FALSE(d.renormalized);
    CHECK(std::abs(d.raw_integral - 1.0) < 1e-3);

    std::vector<double> samples;
    for (int i = 0; i < 1000000; ++i) samples.push_back(sample(mp, rng));
    const std::vector<double> hg = linspace(lo, hi, 201);
    CHECK(density_l1(histogram_density(samples, hg), mdn_density_curve(model, x, hg).curve) < 0.02);
  }
}

TEST_CASE("mode extraction") {
  const ModeReport all = extract_modes(testing::zero_mdn(4), 0.0);
  CHECK(all.modes.size() == 4);

  MdnModel m = testing::zero_mdn(3);
  const MlpLayout l = m.arch.layout();
  testing::bias(l, m.params, 2, 0) = -10.0;
  testing::bias(l, m.params, 2, 4) = 2.0;
  testing::bias(l, m.params, 2, 5) = -1.0;
  ModeReport r = extract_modes(m, 0.0);
  REQUIRE(r.modes.size() == 2);
  CHECK(r.modes[0].mu == -1.0);
  CHECK(r.modes[1].mu == 2.0);
  for (const Mode& mode : r.modes) CHECK(mode.pi >= 0.05);

  const double roots[2] = {-0.9, 1.8};
  match_modes(r, roots);
  CHECK(r.nearest == std::vector<std::size_t>{0, 1});
  CHECK(r.max_error() == doctest::Approx(0.2));
  CHECK(r.one_to_one());
  const double crowded[2] = {1.9, 2.1};
  match_modes(r, crowded);
  CHECK_FALSE(r.one_to_one());
}

TEST_CASE("monotonicity violation on rigged means") {
  const std::vector<double> grid = linspace(-1, 1, 21);
  CHECK(monotonicity_violation(testing::linear_mdn(3, 1.0), grid, 0.01) == 0.0);
  CHECK(monotonicity_violation(testing::linear_mdn(1, -1.0), grid, 0.01) ==
        doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("inter-mode mass") {
  const std::vector<double> none;
  CHECK(inter_mode_mass(none, Interval{0, 1}) == 0.0);
  const std::vector<double> in = {0.1, 0.5, 0.9};
  CHECK(inter_mode_mass(in, Interval{0, 1}) == 1.0);
  CHECK(inter_mode_mass(in, Interval{0.4, 2}) == doctest::Approx(2.0 / 3.0));
  const double roots[3] = {-0.894, 0.0, 0.894};
  const std::vector<Interval> w = inter_root_windows(roots, 0.2);
  REQUIRE(w.size() == 2);
  CHECK(w[0].lo == doctest::Approx(-0.694));
  CHECK(w[0].hi == doctest::Approx(-0.2));
  CHECK(inter_mode_mass(in, w) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("Kolmogorov-Smirnov statistic") {
  const std::vector<double> a = {1, 2, 3, 4};
  const std::vector<double> b = {5, 6, 7};
  CHECK(ks_statistic(a, a) == 0.0);
  CHECK(ks_statistic(a, b) == 1.0);
  const std::vector<double> c = {2.5, 3.5};
  CHECK(ks_statistic(a, c) == doctest::Approx(0.5));
}

TEST_CASE("branch helpers") {
  const HugoniotBranch line{1.0, 2.0, 0.0, 1.0};
  MdnModel m = testing::linear_mdn(3, 2.0, 1.0);
  CHECK(branch_rmse(m, 0, line) < 1e-12);
  const MlpLayout l = m.arch.layout();
  testing::bias(l, m.params, 2, 4) += 0.5;  // shift component 2 up by 0.5
  CHECK(branch_rmse(m, 1, line) == doctest::Approx(0.5).epsilon(1e-12));
  const HugoniotBranch lines[2] = {{1.5, 2.0, 0.0, 1.0}, {1.0, 2.0, 0.0, 1.0}};
  const std::vector<int> best = best_assignment(m, lines);
  CHECK(best[0] == 1);
  CHECK(best[1] != 1);

  MdnModel weights = testing::zero_mdn(4);
  testing::bias(weights.arch.layout(), weights.params, 2, 3) = -8.0;
  const std::vector<double> ctx = {0.0, 1.0};
  CHECK(suppressed_components(weights, ctx) == 1);
  CHECK(mean_sigma(weights, ctx) == doctest::Approx(1.0).epsilon(1e-15));
}
