#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "helpers.hpp"
#include "pimdn/cfm.hpp"
#include "pimdn/errors.hpp"
#include "pimdn/mdn.hpp"
#include "pimdn/random.hpp"

using namespace pimdn;

namespace {

MixtureParams mixture(std::vector<double> pi, std::vector<double> mu, std::vector<double> sigma) {
  MixtureParams mp;
  mp.pi = Eigen::Map<Eigen::VectorXd>(pi.data(), static_cast<Eigen::Index>(pi.size()));
  mp.mu = Eigen::Map<Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  mp.sigma = Eigen::Map<Eigen::VectorXd>(sigma.data(), static_cast<Eigen::Index>(sigma.size()));
  return mp;
}

MixtureParams random_mixture(Rng& rng) {
  const int m = 1 + static_cast<int>(rng.below(4));
  MixtureParams mp;
  mp.pi.resize(m);
  mp.mu.resize(m);
  mp.sigma.resize(m);
  for (int k = 0; k < m; ++k) {
    mp.pi[k] = rng.uniform(0.05, 1.0);
    mp.mu[k] = rng.uniform(-3, 3);
    mp.sigma[k] = rng.uniform(0.2, 2.0);
  }
  mp.pi /= mp.pi.sum();
  return mp;
}

double naive_pdf(const MixtureParams& mp, double u) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < mp.components(); ++k) {
    const double z = (u - mp.mu[k]) / mp.sigma[k];
    s += mp.pi[k] * std::exp(-0.5 * z * z) / (mp.sigma[k] * std::sqrt(2 * std::numbers::pi));
  }
  return s;
}

}  // namespace

TEST_CASE("parameter counts") {
  Architecture a;
  a.hidden_width = 16;
  a.components = 3;
  CHECK(param_count(a) == 457);
  a.hidden_width = 1;
  a.components = 1;
  CHECK(param_count(a) == 10);
  CfmArchitecture c;
  c.hidden_width = 20;
  CHECK(param_count(c) == 521);
}

TEST_CASE("zero-parameter model") {
  for (int m : {1, 2, 5}) {
    const MdnModel model = testing::zero_mdn(m);
    for (double x : {-3.0, 0.0, 12.5}) {
      const MixtureParams mp = mdn_forward(model, x);
      for (int k = 0; k < m; ++k) {
        CHECK(mp.pi[k] == doctest::Approx(1.0 / m).epsilon(1e-15));
        CHECK(mp.mu[k] == 0.0);
        CHECK(mp.sigma[k] == 1.0);
      }
    }
  }
}

TEST_CASE("softmax shift invariance") {
  Architecture a;
  a.components = 3;
  MdnModel model = init_params(a, 4);
  Rng rng(1);
  for (Eigen::Index i = 0; i < model.params.size(); ++i) model.params[i] = rng.uniform(-1, 1);
  const MixtureParams before = mdn_forward(model, 0.7);
  const MlpLayout l = a.layout();
  for (int k = 0; k < 3; ++k) testing::bias(l, model.params, 2, k) += 5.0;
  const MixtureParams after = mdn_forward(model, 0.7);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(before.pi[k] - after.pi[k]) < 1e-12);
}

TEST_CASE("log-scale clamp") {
  MdnModel model = testing::zero_mdn(1);
  testing::bias(model.arch.layout(), model.params, 2, 2) = 50.0;
  CHECK(mdn_forward(model, 0.0).sigma[0] == doctest::Approx(std::exp(10.0)));
  testing::bias(model.arch.layout(), model.params, 2, 2) = -50.0;
  CHECK(mdn_forward(model, 0.0).sigma[0] == doctest::Approx(std::exp(-10.0)));
}

TEST_CASE("forward rejects bad contexts") {
  const MdnModel model = testing::zero_mdn(2);
  CHECK_THROWS_AS(mdn_forward(model, std::nan("")), InvalidInput);
  CHECK_THROWS_AS(mdn_forward(model, INFINITY), InvalidInput);
  const double two[2] = {0.0, 1.0};
  CHECK_THROWS_AS(mdn_forward(model, std::span<const double>(two)), InvalidInput);
}

TEST_CASE("batched forward matches single evaluations") {
  Architecture a;
  a.components = 3;
  MdnModel model = init_params(a, 9);
  model.scaling = {0.3, 2.0, -1.0, 0.5};
  const std::vector<double> xs = {-1.0, 0.0, 0.25, 3.0};
  const auto batch = mdn_forward_batch(model, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const MixtureParams one = mdn_forward(model, xs[i]);
    CHECK((batch[i].pi - one.pi).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((batch[i].mu - one.mu).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((batch[i].sigma - one.sigma).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("log density examples") {
  CHECK(log_pdf(mixture({1.0}, {0.0}, {1.0}), 0.0) == doctest::Approx(-0.918939).epsilon(1e-6));
  CHECK(log_pdf(mixture({0.5, 0.5}, {-1.0, 1.0}, {1.0, 1.0}), 0.0) ==
        doctest::Approx(-1.418939).epsilon(1e-6));
}

TEST_CASE("log density against the naive formula") {
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const MixtureParams mp = random_mixture(rng);
    const double u = rng.uniform(-4, 4);
    CHECK(std::abs(log_pdf(mp, u) - std::log(naive_pdf(mp, u))) < 1e-12);
  }
}

TEST_CASE("log density stays finite far in the tails") {
  const MixtureParams mp = mixture({0.5, 0.5}, {-1.0, 1.0}, {1e-3, 1e-3});
  for (double u : {0.0, 50.0, -1e4}) {
    CHECK(std::isfinite(log_pdf(mp, u)));
    CHECK(pdf(mp, u) >= 0.0);
  }
}

TEST_CASE("density integrates to one and reproduces the moments") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const MixtureParams mp = random_mixture(rng);
    const double half = 10 * mp.mu.cwiseAbs().maxCoeff() + 10 * mp.sigma.maxCoeff();
    const int n = 100000;
    const double du = 2 * half / (n - 1);
    double m0 = 0, m1 = 0, m2 = 0;
    for (int i = 0; i < n; ++i) {
      const double u = -half + i * du;
      const double w = (i == 0 || i == n - 1) ? 0.5 * du : du;
      const double p = pdf(mp, u);
      m0 += w * p;
      m1 += w * u * p;
      m2 += w * u * u * p;
    }
    CHECK(std::abs(m0 - 1.0) < 1e-4);
    CHECK(std::abs(m1 - mean(mp)) < 1e-4);
    CHECK(std::abs(m2 - second_moment(mp)) < 1e-4);
  }
}

TEST_CASE("moment examples") {
  const MixtureParams one = mixture({1.0}, {2.0}, {3.0});
  CHECK(mean(one) == 2.0);
  CHECK(second_moment(one) == 13.0);
  const MixtureParams sym = mixture({0.5, 0.5}, {-1.0, 1.0}, {1e-15, 1e-15});
  CHECK(mean(sym) == 0.0);
  CHECK(second_moment(sym) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("interval mass") {
  const MixtureParams mp = mixture({1.0}, {0.0}, {1.0});
  CHECK(mass_in_interval(mp, -1.0, 1.0) == doctest::Approx(0.682689492137).epsilon(1e-10));
  CHECK(mass_in_interval(mp, -40.0, 40.0) == doctest::Approx(1.0));
}

TEST_CASE("sampling") {
  Rng rng(5);
  const MixtureParams point = mixture({1.0, 0.0}, {7.0, -3.0}, {1e-12, 1.0});
  for (int i = 0; i < 100; ++i) CHECK(std::abs(sample(point, rng) - 7.0) < 1e-9);

  const MixtureParams mp = mixture({0.5, 0.5}, {-1.0, 1.0}, {0.1, 0.1});
  Rng a(77), b(77);
  double s = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    const double x = sample(mp, a);
    CHECK_FALSE(x != sample(mp, b));
    s += x;
  }
  CHECK(std::abs(s / 1e6) < 0.005);
}

TEST_CASE("initialization") {
  Architecture a;
  a.hidden_width = 8;
  a.components = 2;
  const MdnModel m1 = init_params(a, 42);
  const MdnModel m2 = init_params(a, 42);
  CHECK(m1.params == m2.params);
  CHECK(m1.params != init_params(a, 43).params);
  const MlpLayout l = a.layout();
  for (int layer = 0; layer < l.layer_count(); ++layer) {
    const double bound = std::sqrt(1.0 / l.fan_in(layer));
    const auto off = static_cast<Eigen::Index>(layer_offset(l, layer));
    const Eigen::Index nw = l.fan_out(layer) * l.fan_in(layer);
    CHECK(m1.params.segment(off, nw).cwiseAbs().maxCoeff() <= bound);
    CHECK(m1.params.segment(off + nw, l.fan_out(layer)).isZero(0.0));
  }
  const MixtureParams mp = mdn_forward(m1, 0.0);
  CHECK(mp.mu.isZero(0.0));
  CHECK((mp.sigma.array() == 1.0).all());
}

TEST_CASE("forward pass is continuous") {
  Architecture a;
  MdnModel model = init_params(a, 8);
  for (double x : {-1.0, 0.0, 0.3, 2.0}) {
    const MixtureParams p = mdn_forward(model, x);
    const MixtureParams q = mdn_forward(model, x + 1e-6);
    CHECK((p.mu - q.mu).cwiseAbs().maxCoeff() < 1e-4);
    CHECK((p.pi - q.pi).cwiseAbs().maxCoeff() < 1e-4);
    CHECK((p.sigma - q.sigma).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("mixture validation") {
  CHECK_NOTHROW(validate(mixture({0.3, 0.7}, {0, 1}, {1, 1})));
  CHECK_THROWS_AS(validate(mixture({0.3, 0.6}, {0, 1}, {1, 1})), InvalidInput);
  CHECK_THROWS_AS(validate(mixture({0.3, 0.7}, {0, 1}, {1, 0})), InvalidInput);
  CHECK_THROWS_AS(validate(mixture({1.0}, {0, 1}, {1})), InvalidInput);
}
