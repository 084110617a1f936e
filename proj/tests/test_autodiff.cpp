#include <doctest.h>

#include <cmath>
#include <vector>

#include "pimdn/autodiff.hpp"
#include "pimdn/errors.hpp"
#include "pimdn/mlp.hpp"
#include "pimdn/random.hpp"

using namespace pimdn;
using ad::Tape;
using ad::Var;

TEST_CASE("lift and read back") {
  Tape t;
  const Var x = t.variable(3.0);
  CHECK(x.value() == 3.0);
  const Var y = t.variable(0.0);
  CHECK(t.backward(y).wrt(y) == 1.0);
}

TEST_CASE("elu and max0 values and slopes") {
  Tape t;
  const Var x = t.variable(-1.0);
  const Var e = ad::elu(x);
  CHECK(e.value() == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-15));
  CHECK(e.value() == doctest::Approx(-0.63212).epsilon(1e-5));
  CHECK(t.backward(e).wrt(x) == doctest::Approx(std::exp(-1.0)));

  const Var z = t.variable(0.0);
  CHECK(t.backward(ad::elu(z)).wrt(z) == 1.0);
  CHECK(t.backward(ad::max0(z)).wrt(z) == 0.0);

  const Var n = t.variable(-0.5);
  const Var m = ad::max0(n);
  CHECK(m.value() == 0.0);
  CHECK(t.backward(m).wrt(n) == 0.0);
}

TEST_CASE("power, product and fan-out rules") {
  Tape t;
  const Var x = t.variable(3.0);
  CHECK(t.backward(x * x).wrt(x) == 6.0);

  const Var a = t.variable(2.0);
  const Var b = t.variable(5.0);
  const auto g = t.backward(a * b);
  CHECK(g.wrt(a) == 5.0);
  CHECK(g.wrt(b) == 2.0);

  const Var z = t.variable(0.0);
  CHECK(t.backward(ad::exp(z) + ad::exp(z)).wrt(z) == 2.0);
}

TEST_CASE("domain violations name the node") {
  Tape t;
  const Var x = t.variable(-1.0);
  CHECK_THROWS_AS(ad::log(x), NonFiniteValue);
  const Var zero = t.variable(0.0);
  CHECK_THROWS_AS(x / zero, NonFiniteValue);
  try {
    ad::log(t.variable(0.0));
    FAIL("expected NonFiniteValue");
  } catch (const NonFiniteValue& e) {
    CHECK(e.node() == static_cast<long>(t.size()));
  }
}

namespace {

// Touches every elementary op.
template <typename Scalar>
Scalar mixed(const std::vector<Scalar>& p) {
  using namespace pimdn::ad;
  using std::exp;
  using std::log;
  using std::tanh;
  const Scalar& a = p[0];
  const Scalar& b = p[1];
  const Scalar& c = p[2];
  const Scalar& d = p[3];
  Scalar y = a * b + exp(c) / (d + 1.0) - log(a + b);
  y = y + tanh(c - d) * elu(b - 1.0) + square(d) - (-a);
  y = y + max0(c - 0.1) + 2.0 / (a + 3.0) - 1.5 * b + (b - 0.5) * 0.25;
  const Scalar parts[3] = {y, a * c, clamp(d, 0.3, 1.0)};
  return log_sum_exp(std::span<const Scalar>(parts)) + sum(std::span<const Scalar>(parts));
}

std::vector<double> random_point(Rng& rng) {
  std::vector<double> p;
  for (int i = 0; i < 4; ++i) p.push_back(rng.uniform(0.2, 1.5));
  return p;
}

Var mixed_expression(Tape& t, Rng& rng, std::vector<Var>& leaves) {
  leaves.clear();
  for (double v : random_point(rng)) leaves.push_back(t.parameter(v));
  return mixed(leaves);
}

}  // namespace

TEST_CASE("parents precede children and values re-evaluate bitwise") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    std::vector<Var> leaves;
    mixed_expression(t, rng, leaves);
    std::vector<Var> lifted;
    for (double v : {0.1, -0.3, 1.2, -1.0, 0.2, 0.8}) lifted.push_back(t.variable(v));
    ad::gaussian_mix(lifted, 0.4);
    std::vector<Var> heads;
    for (double v : {0.3, -0.2, 0.5, -0.4, 0.1, -12.0}) heads.push_back(t.variable(v));
    const double us[3] = {0.2, -0.7, 1.1};
    ad::mixture_loglik(heads, us, -10.0, 10.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::uint32_t p : t.parents(i)) CHECK(p < i);
      CHECK(t.recompute(i) == t.node(i).value);
    }
  }
}

TEST_CASE("gradients of every op against central differences") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<double> x = random_point(rng);
    Tape t;
    std::vector<Var> leaves;
    for (double v : x) leaves.push_back(t.parameter(v));
    CHECK(mixed(leaves).value() == mixed(x));
    const Eigen::VectorXd g = t.backward(mixed(leaves)).parameters();
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::vector<double> up = x, dn = x;
      up[i] += 1e-6;
      dn[i] -= 1e-6;
      if ((x[2] - 0.1) * (up[2] - 0.1) <= 0 || (x[2] - 0.1) * (dn[2] - 0.1) <= 0) continue;
      const double fd = (mixed(up) - mixed(dn)) / 2e-6;
      CHECK(g[static_cast<Eigen::Index>(i)] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("random network: parameter gradients match finite differences") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const MlpLayout layout{1 + static_cast<int>(rng.below(2)), 2 + static_cast<int>(rng.below(5)),
                           2, 1 + static_cast<int>(rng.below(3))};
    const auto n = static_cast<Eigen::Index>(param_count(layout));
    Eigen::VectorXd theta(n);
    for (Eigen::Index i = 0; i < n; ++i) theta[i] = rng.uniform(-1, 1);
    Eigen::MatrixXd x(layout.input_dim, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-2, 2);

    const auto loss = [&](const Eigen::VectorXd& p) {
      const Eigen::MatrixXd o =
          mlp_forward<double>(layout, {p.data(), static_cast<std::size_t>(p.size())}, x);
      return 0.5 * o.squaredNorm();
    };
    Tape t;
    std::vector<Var> params;
    for (Eigen::Index i = 0; i < n; ++i) params.push_back(t.parameter(theta[i]));
    const MatrixX<Var> out = mlp_forward<Var>(layout, params, MatrixX<Var>(x.cast<Var>()));
    std::vector<Var> terms;
    for (Eigen::Index i = 0; i < out.size(); ++i) terms.push_back(0.5 * ad::square(out.data()[i]));
    const Eigen::VectorXd g = t.backward(ad::sum(terms)).parameters();

    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd up = theta, dn = theta;
      up[i] += 1e-5;
      dn[i] -= 1e-5;
      const double fd = (loss(up) - loss(dn)) / 2e-5;
      if (std::abs(fd) < 1e-6) {
        CHECK(std::abs(g[i] - fd) < 1e-8);
      } else {
        CHECK(std::abs(g[i] - fd) / std::abs(fd) < 1e-5);
      }
    }
  }
}

TEST_CASE("linearity of the reverse sweep") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    std::vector<Var> leaves;
    const Var f = mixed_expression(t, rng, leaves);
    const Var g = ad::square(leaves[0] - leaves[3]) * ad::exp(leaves[1]);
    const double alpha = rng.uniform(-2, 2);
    const double beta = rng.uniform(-2, 2);
    const Eigen::VectorXd lhs = t.backward(alpha * f + beta * g).parameters();
    const Eigen::VectorXd rhs =
        alpha * t.backward(f).parameters() + beta * t.backward(g).parameters();
    for (Eigen::Index i = 0; i < lhs.size(); ++i) {
      CHECK(std::abs(lhs[i] - rhs[i]) <= 1e-12 * std::max(1.0, std::abs(rhs[i])));
    }
  }
}

TEST_CASE("two evaluations are bit-identical") {
  auto run = [] {
    Rng rng(99);
    Tape t;
    std::vector<Var> leaves;
    const Var y = mixed_expression(t, rng, leaves);
    return std::make_pair(y.value(), t.backward(y).parameters());
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("fused Gaussian sum equals the composed expression") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 1 + static_cast<int>(rng.below(4));
    const double u = rng.uniform(-2, 2);
    Tape t1, t2;
    std::vector<Var> fused_in, plain_in;
    std::vector<double> vals;
    for (int k = 0; k < m; ++k) {
      vals.push_back(rng.uniform(-2, 0));
      vals.push_back(rng.uniform(-1, 1));
      vals.push_back(rng.uniform(0.3, 2.0));
    }
    for (double v : vals) {
      fused_in.push_back(t1.parameter(v));
      plain_in.push_back(t2.parameter(v));
    }
    const Var fused = ad::gaussian_mix(fused_in, u);
    std::vector<Var> exps;
    for (int k = 0; k < m; ++k) {
      const Var z = (u - plain_in[3 * k + 1]) * plain_in[3 * k + 2];
      exps.push_back(plain_in[3 * k] - 0.5 * ad::square(z));
    }
    const Var plain = ad::log_sum_exp(exps);
    CHECK(fused.value() == doctest::Approx(plain.value()).epsilon(1e-14));
    const Eigen::VectorXd ga = t1.backward(fused).parameters();
    const Eigen::VectorXd gb = t2.backward(plain).parameters();
    for (Eigen::Index i = 0; i < ga.size(); ++i) {
      CHECK(std::abs(ga[i] - gb[i]) <= 1e-13 * std::max(1.0, std::abs(gb[i])));
    }
  }
}

TEST_CASE("fused mixture likelihood equals the composed expression") {
  Rng rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 1 + static_cast<int>(rng.below(4));
    std::vector<double> targets;
    for (int i = 0; i < 5; ++i) targets.push_back(rng.uniform(-2, 2));
    std::vector<double> vals;
    for (int k = 0; k < 3 * m; ++k) vals.push_back(rng.uniform(-1.5, 1.5));
    if (trial % 3 == 0) vals[static_cast<std::size_t>(2 * m)] = 11.0;  // clamped log-scale
    Tape t1, t2;
    std::vector<Var> a, b;
    for (double v : vals) {
      a.push_back(t1.parameter(v));
      b.push_back(t2.parameter(v));
    }
    const Var fused = ad::mixture_loglik(a, targets, -10.0, 10.0);
    std::vector<Var> logits(b.begin(), b.begin() + m);
    const Var norm = ad::log_sum_exp(logits);
    std::vector<Var> per_point;
    for (double u : targets) {
      std::vector<Var> terms;
      for (int k = 0; k < m; ++k) {
        const Var s = ad::clamp(b[2 * m + k], -10.0, 10.0);
        const Var z = (u - b[m + k]) * ad::exp(-s);
        terms.push_back(b[k] - norm - s - 0.91893853320467274178 - 0.5 * ad::square(z));
      }
      per_point.push_back(ad::log_sum_exp(terms));
    }
    const Var plain = ad::sum(per_point);
    CHECK(fused.value() == doctest::Approx(plain.value()).epsilon(1e-13));
    const Eigen::VectorXd ga = t1.backward(fused).parameters();
    const Eigen::VectorXd gb = t2.backward(plain).parameters();
    for (Eigen::Index i = 0; i < ga.size(); ++i) {
      CHECK(std::abs(ga[i] - gb[i]) <= 1e-12 * std::max(1.0, std::abs(gb[i])));
    }
  }
}
