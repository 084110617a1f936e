#include "pimdn/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "pimdn/errors.hpp"
#include "pimdn/random.hpp"

namespace pimdn {

MlpLayout Architecture::layout() const {
  return MlpLayout{input_dim, hidden_width, hidden_layers, 3 * components * target_dim};
}

void validate(const Architecture& arch) {
  if (arch.components < 1) throw InvalidConfig("component count must be at least 1");
  if (arch.hidden_width < 1) throw InvalidConfig("hidden width must be at least 1");
  if (arch.target_dim != 1) throw InvalidConfig("only scalar targets are supported");
  if (arch.activation != "elu") throw InvalidConfig("unsupported activation " + arch.activation);
  validate(arch.layout());
}

std::size_t param_count(const Architecture& arch) { return param_count(arch.layout()); }

MdnModel init_params(const Architecture& arch, std::uint64_t seed) {
  validate(arch);
  const MlpLayout layout = arch.layout();
  MdnModel model;
  model.arch = arch;
  model.params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(layout)));
  Rng rng = Rng::stream(seed, streams::init);
  for (int l = 0; l < layout.layer_count(); ++l) {
    const int in = layout.fan_in(l);
    const int out = layout.fan_out(l);
    const double bound = std::sqrt(1.0 / in);
    const auto offset = static_cast<Eigen::Index>(layer_offset(layout, l));
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(out) * in; ++k) {
      model.params[offset + k] = rng.uniform(-bound, bound);
    }
  }
  return model;
}

namespace {

MixtureParams heads_to_mixture(const MdnModel& model, const Eigen::Ref<const Eigen::VectorXd>& h) {
  const int m = model.arch.components;
  MixtureParams mp;
  const Eigen::VectorXd logits = h.head(m);
  const Eigen::VectorXd shifted = (logits.array() - logits.maxCoeff()).exp();
  mp.pi = shifted / shifted.sum();
  mp.mu = h.segment(m, m).unaryExpr(
      [&](double z) { return model.scaling.target_from_unit(z); });
  mp.sigma = h.segment(2 * m, m).unaryExpr([&](double s) {
    return model.scaling.target_std * std::exp(std::clamp(s, model.log_sigma_min,
                                                          model.log_sigma_max));
  });
  return mp;
}

void check_params(const MdnModel& model) {
  if (static_cast<std::size_t>(model.params.size()) != param_count(model.arch)) {
    throw InvalidInput("parameter vector length " + std::to_string(model.params.size()) +
                       " does not match architecture (" +
                       std::to_string(param_count(model.arch)) + ")");
  }
}

}  // namespace

MixtureParams mdn_forward(const MdnModel& model, std::span<const double> x) {
  check_params(model);
  if (static_cast<int>(x.size()) != model.arch.input_dim) {
    throw InvalidInput("context has " + std::to_string(x.size()) + " entries, model expects " +
                       std::to_string(model.arch.input_dim));
  }
  Eigen::MatrixXd input(model.arch.input_dim, 1);
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k])) throw InvalidInput("context is not finite");
    input(static_cast<Eigen::Index>(k), 0) = model.scaling.context_to_unit(x[k]);
  }
  const Eigen::MatrixXd out = mlp_forward<double>(
      model.arch.layout(), std::span<const double>(model.params.data(), model.params.size()),
      input);
  return heads_to_mixture(model, out.col(0));
}

MixtureParams mdn_forward(const MdnModel& model, double x) {
  return mdn_forward(model, std::span<const double>(&x, 1));
}

std::vector<MixtureParams> mdn_forward_batch(const MdnModel& model, std::span<const double> xs) {
  check_params(model);
  if (model.arch.input_dim != 1) throw InvalidInput("batched evaluation needs scalar contexts");
  Eigen::MatrixXd input(1, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (!std::isfinite(xs[k])) throw InvalidInput("context is not finite");
    input(0, static_cast<Eigen::Index>(k)) = model.scaling.context_to_unit(xs[k]);
  }
  const MlpBatch batch(model.arch.layout(), model.params, std::move(input));
  std::vector<MixtureParams> out;
  out.reserve(xs.size());
  for (Eigen::Index j = 0; j < batch.output().cols(); ++j) {
    out.push_back(heads_to_mixture(model, batch.output().col(j)));
  }
  return out;
}

Eigen::MatrixXd MdnGraph::unit_inputs(const MdnModel& model, std::span<const double> contexts) {
  check_params(model);
  if (model.arch.input_dim != 1) throw InvalidInput("MdnGraph needs scalar contexts");
  Eigen::MatrixXd input(1, static_cast<Eigen::Index>(contexts.size()));
  for (std::size_t k = 0; k < contexts.size(); ++k) {
    if (!std::isfinite(contexts[k])) throw InvalidInput("context is not finite");
    input(0, static_cast<Eigen::Index>(k)) = model.scaling.context_to_unit(contexts[k]);
  }
  return input;
}

MdnGraph::MdnGraph(const MdnModel& model, ad::Tape& tape, std::span<const double> contexts,
                   GradientPath path)
    : model_(&model),
      contexts_(contexts.begin(), contexts.end()),
      net_(model.arch.layout(), model.params, unit_inputs(model, contexts), tape, path),
      log_scales_(contexts_.size() * static_cast<std::size_t>(model.arch.components)) {}

const ad::Var& MdnGraph::log_scale(std::size_t i, int m) const {
  ad::Var& v = log_scales_[i * static_cast<std::size_t>(components()) + static_cast<std::size_t>(m)];
  if (v.is_constant()) {
    v = ad::clamp(raw_log_scale(i, m), model_->log_sigma_min, model_->log_sigma_max);
  }
  return v;
}

std::size_t MdnGraph::index_of(double context) const {
  const auto it = std::find(contexts_.begin(), contexts_.end(), context);
  if (it == contexts_.end()) {
    throw InvalidInput("context " + format_double(context) + " was not evaluated by this graph");
  }
  return static_cast<std::size_t>(it - contexts_.begin());
}

std::vector<ad::Var> MdnGraph::log_weights(std::size_t i) const {
  const int m = components();
  std::vector<ad::Var> logits(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) logits[static_cast<std::size_t>(k)] = logit(i, k);
  const ad::Var norm = ad::log_sum_exp(logits);
  for (ad::Var& l : logits) l = l - norm;
  return logits;
}

std::vector<ad::Var> MdnGraph::weights(std::size_t i) const {
  std::vector<ad::Var> w = log_weights(i);
  for (ad::Var& v : w) v = ad::exp(v);
  return w;
}

std::vector<GaussianTerm<ad::Var>> MdnGraph::unit_terms(std::size_t i) const {
  const std::vector<ad::Var> lw = log_weights(i);
  std::vector<GaussianTerm<ad::Var>> terms;
  terms.reserve(lw.size());
  for (int k = 0; k < components(); ++k) {
    terms.push_back(gaussian_term(lw[static_cast<std::size_t>(k)], unit_mean(i, k), log_scale(i, k)));
  }
  return terms;
}

ad::Var MdnGraph::mean(std::size_t i, int m) const {
  return model_->scaling.target_mean + model_->scaling.target_std * unit_mean(i, m);
}

}  // namespace pimdn
