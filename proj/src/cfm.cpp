#include "pimdn/cfm.hpp"

#include <cmath>

#include "pimdn/autodiff.hpp"
#include "pimdn/errors.hpp"

namespace pimdn {

std::size_t param_count(const CfmArchitecture& arch) { return param_count(arch.layout()); }

CfmModel init_cfm(const CfmArchitecture& arch, std::uint64_t seed) {
  if (arch.context_dim != 1) throw InvalidConfig("flow matching supports scalar contexts only");
  const MlpLayout layout = arch.layout();
  validate(layout);
  CfmModel model;
  model.arch = arch;
  model.params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(layout)));
  Rng rng = Rng::stream(seed, streams::init);
  for (int l = 0; l < layout.layer_count(); ++l) {
    const int in = layout.fan_in(l);
    const double bound = std::sqrt(1.0 / in);
    const auto offset = static_cast<Eigen::Index>(layer_offset(layout, l));
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(layout.fan_out(l)) * in; ++k) {
      model.params[offset + k] = rng.uniform(-bound, bound);
    }
  }
  return model;
}

BridgePoint bridge(double u0, double u1, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidInput("bridge time must lie in [0, 1]");
  return {(1.0 - t) * u0 + t * u1, u1 - u0};
}

CfmDraws draw_cfm(std::size_t n, Rng& rng) {
  CfmDraws d;
  d.u0.resize(n);
  d.t.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.u0[i] = rng.normal();
    d.t[i] = rng.uniform();
  }
  return d;
}

CfmDraws training_draws(std::size_t n, std::uint64_t seed, long it) {
  Rng rng = Rng::stream(child_seed(seed, streams::training), static_cast<std::uint64_t>(it));
  return draw_cfm(n, rng);
}

namespace {

void check_model(const CfmModel& model) {
  if (static_cast<std::size_t>(model.params.size()) != param_count(model.arch)) {
    throw InvalidInput("flow model parameter vector does not match its architecture");
  }
}

Eigen::MatrixXd velocity_inputs(std::span<const double> u, std::span<const double> t,
                                std::span<const double> x) {
  const auto n = static_cast<Eigen::Index>(u.size());
  Eigen::MatrixXd in(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    in(0, i) = u[k];
    in(1, i) = t[k];
    in(2, i) = x[k];
  }
  return in;
}

// Bridge inputs and regression targets for a batch.
struct Regression {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd target;
};

Regression regression(const CfmModel& model, const Dataset& batch, const CfmDraws& draws) {
  validate(batch);
  if (batch.empty()) throw EmptyBatch();
  if (draws.u0.size() != batch.size() || draws.t.size() != batch.size()) {
    throw InvalidInput("flow matching draws do not match the batch size");
  }
  const auto n = static_cast<Eigen::Index>(batch.size());
  Regression r{Eigen::MatrixXd(3, n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const BridgePoint b =
        bridge(draws.u0[k], model.scaling.target_to_unit(batch.target[k]), draws.t[k]);
    r.inputs(0, i) = b.point;
    r.inputs(1, i) = draws.t[k];
    r.inputs(2, i) = model.scaling.context_to_unit(batch.context[k]);
    r.target[i] = b.velocity;
  }
  return r;
}

}  // namespace

Eigen::VectorXd cfm_velocity(const CfmModel& model, std::span<const double> u,
                             std::span<const double> t, std::span<const double> unit_context) {
  check_model(model);
  if (t.size() != u.size() || unit_context.size() != u.size()) {
    throw InvalidInput("velocity inputs differ in length");
  }
  const MlpBatch net(model.arch.layout(), model.params, velocity_inputs(u, t, unit_context));
  return net.output().row(0).transpose();
}

double cfm_loss(const CfmModel& model, const Dataset& batch, const CfmDraws& draws) {
  check_model(model);
  const Regression r = regression(model, batch, draws);
  const MlpBatch net(model.arch.layout(), model.params, r.inputs);
  return (net.output().row(0).transpose() - r.target).squaredNorm() /
         static_cast<double>(r.target.size());
}

double cfm_loss(const CfmModel& model, const Dataset& batch, std::uint64_t seed) {
  Rng rng(seed);
  return cfm_loss(model, batch, draw_cfm(batch.size(), rng));
}

CfmLossGrad cfm_loss_gradient(const CfmModel& model, const Dataset& batch, const CfmDraws& draws,
                              GradientPath path) {
  check_model(model);
  const Regression r = regression(model, batch, draws);
  const double inv_n = 1.0 / static_cast<double>(r.target.size());
  if (path == GradientPath::layered) {
    const MlpBatch net(model.arch.layout(), model.params, r.inputs);
    const Eigen::RowVectorXd diff = net.output().row(0) - r.target.transpose();
    CfmLossGrad out;
    out.loss = diff.squaredNorm() * inv_n;
    out.gradient = net.backprop(2.0 * inv_n * diff);
    return out;
  }
  ad::Tape tape;
  const MlpGraph net(model.arch.layout(), model.params, r.inputs, tape, path);
  std::vector<ad::Var> sq;
  sq.reserve(static_cast<std::size_t>(r.target.size()));
  for (Eigen::Index i = 0; i < r.target.size(); ++i) {
    sq.push_back(ad::square(net.output(0, i) - r.target[i]));
  }
  const ad::Var loss = ad::sum(sq) * inv_n;
  return {loss.value(), net.gradient(loss)};
}

CfmModel train_cfm(CfmModel model, const Dataset& data, const CfmTrainConfig& config,
                   TrainLog& log) {
  if (config.iterations < 1) throw InvalidConfig("iteration count must be at least 1");
  if (!(config.adam.lr > 0.0)) throw InvalidConfig("learning rate must be positive");
  check_model(model);
  validate(data);
  if (data.empty()) throw EmptyBatch();
  if (config.standardize) model.scaling = fit_standardization(data);
  AdamState state(model.params.size(), config.adam);
  for (long it = 0; it < config.iterations; ++it) {
    const CfmDraws draws = training_draws(data.size(), config.seed, it);
    const CfmLossGrad lg = cfm_loss_gradient(model, data, draws, config.path);
    log.append(it, lg.loss, 0.0, lg.loss);
    adam_step(model.params, lg.gradient, state);
  }
  return model;
}

std::vector<double> cfm_flow(const CfmModel& model, std::span<const double> contexts,
                             std::span<const double> u0, int steps) {
  check_model(model);
  if (steps < 1) throw InvalidInput("Euler step count must be at least 1");
  if (u0.size() != contexts.size()) throw InvalidInput("one initial state per context expected");
  const auto n = static_cast<Eigen::Index>(contexts.size());
  Eigen::MatrixXd in(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    in(0, i) = u0[k];
    in(2, i) = model.scaling.context_to_unit(contexts[k]);
  }
  const double dt = 1.0 / steps;
  const MlpLayout layout = model.arch.layout();
  for (int s = 0; s < steps; ++s) {
    in.row(1).setConstant(s * dt);
    const MlpBatch net(layout, model.params, in);
    in.row(0) += dt * net.output().row(0);
    if (!in.row(0).allFinite()) throw SamplerDiverged(s + 1);
  }
  std::vector<double> out(contexts.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = model.scaling.target_from_unit(in(0, i));
  }
  return out;
}

std::vector<double> cfm_sample(const CfmModel& model, std::span<const double> contexts, int steps,
                               Rng& rng) {
  std::vector<double> u0(contexts.size());
  for (double& u : u0) u = rng.normal();
  return cfm_flow(model, contexts, u0, steps);
}

double cfm_sample(const CfmModel& model, double context, int steps, Rng& rng) {
  return cfm_sample(model, std::span<const double>(&context, 1), steps, rng).front();
}

}  // namespace pimdn
