#include "pimdn/optim.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "pimdn/errors.hpp"

namespace pimdn {

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw InvalidInput("adam_step: parameter, gradient and moment lengths differ");
  }
  if (!(state.hp.lr > 0.0)) throw InvalidConfig("learning rate must be positive");
  for (Eigen::Index i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NonFiniteGradient(state.step + 1, static_cast<std::size_t>(i));
    }
  }
  const AdamConfig& hp = state.hp;
  ++state.step;
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  state.m = hp.beta1 * state.m + (1.0 - hp.beta1) * grads;
  state.v = hp.beta2 * state.v + (1.0 - hp.beta2) * grads.cwiseProduct(grads);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
  }
}

void TrainLog::append(long it, double data_term, double physics_term, double total_term) {
  iteration.push_back(it);
  nll.push_back(data_term);
  physics.push_back(physics_term);
  total.push_back(total_term);
}

double TrainLog::mean_total(std::size_t first, std::size_t count) const {
  double s = 0.0;
  for (std::size_t i = first; i < first + count; ++i) s += total.at(i);
  return s / static_cast<double>(count);
}

void write_log_csv(std::ostream& out, const TrainLog& log) {
  out << "iteration,nll,physics,total\n";
  for (std::size_t i = 0; i < log.size(); ++i) {
    out << log.iteration[i] << ',' << format_double(log.nll[i]) << ','
        << format_double(log.physics[i]) << ',' << format_double(log.total[i]) << '\n';
  }
}

void write_log_csv(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_log_csv(out, log);
}

LossSetup make_loss_setup(const Dataset& data, const TrainConfig& config) {
  LossSetup setup;
  setup.residual = config.residual;
  setup.lambda = config.lambda;
  setup.class_mode = config.class_mode;
  setup.class_map = config.class_map;
  if (config.residual) {
    setup.collocation = config.collocation.empty()
                            ? default_collocation(data, config.collocation_grid)
                            : config.collocation;
  }
  return setup;
}

MdnModel train(MdnModel model, const Dataset& data, const TrainConfig& config, TrainLog& log) {
  if (config.iterations < 1) throw InvalidConfig("iteration count must be at least 1");
  if (!(config.adam.lr > 0.0)) throw InvalidConfig("learning rate must be positive");
  validate(model.arch);
  if (config.class_mode == ClassMode::class_informed) {
    if (!data.has_labels()) throw InvalidConfig("class-informed training needs labeled data");
    validate(config.class_map, model.arch.components);
  }
  if (config.standardize) model.scaling = fit_standardization(data);

  const Objective objective(data, make_loss_setup(data, config));
  AdamState state(model.params.size(), config.adam);
  ad::Tape tape;
  for (long it = 0; it < config.iterations; ++it) {
    tape.clear();
    const MdnGraph graph(model, tape, objective.contexts(), config.path);
    const LossTerms terms = objective.build(graph);
    const Eigen::VectorXd grad = graph.gradient(terms.total);
    log.append(it, terms.nll.value(), terms.physics.value(), terms.total.value());
    adam_step(model.params, grad, state);
  }
  return model;
}

TrainResult train(MdnModel model, const Dataset& data, const TrainConfig& config) {
  TrainResult result;
  result.model = train(std::move(model), data, config, result.log);
  return result;
}

}  // namespace pimdn
