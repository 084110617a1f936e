#include <doctest.h>

#include <cmath>
#include <sstream>

#include "pimdn/config.hpp"
#include "pimdn/errors.hpp"
#include "pimdn/optim.hpp"
#include "pimdn/problems.hpp"
#include "pimdn/random.hpp"

using namespace pimdn;

namespace {

// loops over plain arrays, no Eigen expressions
void naive_adam(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                std::vector<double>& v, long t, const AdamConfig& c) {
  const double b1t = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double b2t = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * (g[i] * g[i]);
    const double mhat = m[i] / b1t;
    const double vhat = v[i] / b2t;
    p[i] = p[i] - c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

RunConfig small_circle() {
  RunConfig c = defaults_for(Problem::circle);
  c.iterations = 300;
  c.hidden_width = 8;
  return c;
}

}  // namespace

TEST_CASE("first Adam step has unit normalized size") {
  Eigen::VectorXd p(1);
  p << 1.0;
  Eigen::VectorXd g(1);
  g << 5.0;
  AdamState s(1, {});
  adam_step(p, g, s);
  CHECK(p[0] == doctest::Approx(0.999).epsilon(1e-9));
  CHECK(s.step == 1);

  Eigen::VectorXd q = Eigen::VectorXd::LinSpaced(4, -1, 1);
  const Eigen::VectorXd before = q;
  AdamState z(4, {});
  for (int i = 0; i < 3; ++i) adam_step(q, Eigen::VectorXd::Zero(4), z);
  CHECK(q == before);
}

TEST_CASE("Adam matches the loop reference bitwise") {
  Rng rng(1);
  AdamConfig cfg;
  cfg.lr = 3e-3;
  const int n = 37;
  Eigen::VectorXd p(n);
  std::vector<double> rp(n), rm(n, 0.0), rv(n, 0.0);
  for (int i = 0; i < n; ++i) rp[static_cast<std::size_t>(i)] = p[i] = rng.uniform(-1, 1);
  AdamState s(n, cfg);
  for (long t = 1; t <= 200; ++t) {
    Eigen::VectorXd g(n);
    std::vector<double> rg(n);
    for (int i = 0; i < n; ++i) rg[static_cast<std::size_t>(i)] = g[i] = rng.uniform(-3, 3);
    adam_step(p, g, s);
    naive_adam(rp, rg, rm, rv, t, cfg);
  }
  for (int i = 0; i < n; ++i) CHECK(p[i] == rp[static_cast<std::size_t>(i)]);
}

TEST_CASE("non-finite gradients leave everything untouched") {
  Eigen::VectorXd p = Eigen::VectorXd::Constant(3, 0.5);
  AdamState s(3, {});
  adam_step(p, Eigen::VectorXd::Constant(3, 0.1), s);
  const Eigen::VectorXd p0 = p;
  const AdamState s0 = s;
  Eigen::VectorXd bad = Eigen::VectorXd::Constant(3, 0.2);
  bad[1] = std::nan("");
  try {
    adam_step(p, bad, s);
    FAIL("expected NonFiniteGradient");
  } catch (const NonFiniteGradient& e) {
    CHECK(e.iteration() == 2);
    CHECK(e.component() == 1);
  }
  CHECK(p == p0);
  CHECK(s.m == s0.m);
  CHECK(s.v == s0.v);
  CHECK(s.step == s0.step);
  CHECK_THROWS_AS(adam_step(p, Eigen::VectorXd::Zero(2), s), InvalidInput);
}

TEST_CASE("one training iteration is one Adam step") {
  const RunConfig rc = small_circle();
  const Dataset d = generate(rc);
  TrainConfig tc = train_config(rc, d);
  tc.iterations = 1;
  const MdnModel init = init_params(mdn_architecture(rc), rc.seed);
  const TrainResult r = train(init, d, tc);
  CHECK(r.log.size() == 1);
  CHECK(r.log.iteration[0] == 0);

  MdnModel start = init;
  start.scaling = fit_standardization(d);
  const LossSetup setup = make_loss_setup(d, tc);
  const Objective obj(d, setup);
  ad::Tape tape;
  const MdnGraph graph(start, tape, obj.contexts());
  const LossTerms terms = obj.build(graph);
  Eigen::VectorXd p = start.params;
  AdamState s(p.size(), tc.adam);
  adam_step(p, graph.gradient(terms.total), s);
  CHECK(r.model.params == p);
  CHECK(r.log.total[0] == terms.total.value());
}

TEST_CASE("a residual that is identically zero does not change the trajectory") {
  RunConfig rc = small_circle();
  const Dataset d = generate(rc);
  TrainConfig tc = train_config(rc, d);
  tc.residual = ResidualSpec{};
  tc.residual->kind = ResidualKind::custom;
  tc.residual->custom = [](const Stencil<ad::Var>& s) { return s.center * 0.0; };
  const MdnModel init = init_params(mdn_architecture(rc), rc.seed);
  tc.lambda = 0.0;
  const TrainResult a = train(init, d, tc);
  tc.lambda = 1.0;
  const TrainResult b = train(init, d, tc);
  CHECK(a.model.params == b.model.params);
  CHECK(a.log.total == b.log.total);
}

TEST_CASE("training is deterministic and lowers the loss") {
  RunConfig rc = small_circle();
  rc.iterations = 1000;
  const Dataset d = generate(rc);
  const TrainConfig tc = train_config(rc, d);
  const MdnModel init = init_params(mdn_architecture(rc), rc.seed);
  const TrainResult a = train(init, d, tc);
  const TrainResult b = train(init, d, tc);
  CHECK(a.model.params == b.model.params);
  CHECK(a.log.nll == b.log.nll);
  CHECK(a.log.mean_total(900, 100) < a.log.mean_total(0, 100));
}

TEST_CASE("log CSV") {
  TrainLog log;
  log.append(1, 0.5, 0.0, 0.5);
  log.append(2, 0.25, 0.125, 0.375);
  std::ostringstream out;
  write_log_csv(out, log);
  CHECK(out.str() == "iteration,nll,physics,total\n1,0.5,0,0.5\n2,0.25,0.125,0.375\n");
}

TEST_CASE("training config errors") {
  RunConfig rc = small_circle();
  const Dataset d = generate(rc);
  TrainConfig tc = train_config(rc, d);
  tc.iterations = 0;
  CHECK_THROWS_AS(train(init_params(mdn_architecture(rc), 1), d, tc), InvalidConfig);
}
