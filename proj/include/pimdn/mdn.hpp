#pragma once

// Mixture density network: an ELU MLP body whose linear output layer holds
// three heads of M rows each, in this order:
//   rows [0, M)   mixture logits      -> pi = softmax(logits)
//   rows [M, 2M)  component means     -> mu, standardized target units
//   rows [2M, 3M) log-scale           -> sigma = exp(clamp(s, -10, 10))
// Contexts and targets are standardized with the model's Standardization;
// mdn_forward() returns parameters in original target units.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pimdn/autodiff.hpp"
#include "pimdn/dataset.hpp"
#include "pimdn/mixture.hpp"
#include "pimdn/mlp.hpp"

namespace pimdn {

struct Architecture {
  int input_dim = 1;
  int hidden_width = 16;
  int hidden_layers = 2;
  int components = 3;
  int target_dim = 1;
  std::string activation = "elu";

  MlpLayout layout() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// (d_x h + h) + (L - 1)(h h + h) + (3 M h + 3 M) for scalar targets.
std::size_t param_count(const Architecture& arch);

void validate(const Architecture& arch);

struct MdnModel {
  Architecture arch;
  Eigen::VectorXd params;
  Standardization scaling;
  double log_sigma_min = -10.0;
  double log_sigma_max = 10.0;
};

/// Weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)) drawn in flat parameter
/// order from stream streams::init of `seed`; all biases 0.
MdnModel init_params(const Architecture& arch, std::uint64_t seed);

/// Mixture at context x (length d_x), target units.
MixtureParams mdn_forward(const MdnModel& model, std::span<const double> x);
MixtureParams mdn_forward(const MdnModel& model, double x);

/// Batched evaluation of the three heads for scalar contexts.
std::vector<MixtureParams> mdn_forward_batch(const MdnModel& model, std::span<const double> xs);

/// Head outputs of an MDN over a set of scalar contexts, placed on a tape.
///
/// Contexts are given in original units; the graph standardizes them.
/// Component quantities stay in standardized target units except where a
/// method says otherwise.
class MdnGraph {
 public:
  MdnGraph(const MdnModel& model, ad::Tape& tape, std::span<const double> contexts,
           GradientPath path = GradientPath::layered);

  const MdnModel& model() const { return *model_; }
  ad::Tape& tape() const { return net_.tape(); }
  std::size_t size() const { return contexts_.size(); }
  double context(std::size_t i) const { return contexts_[i]; }
  /// Position of a context passed to the constructor (exact match).
  std::size_t index_of(double context) const;

  int components() const { return model_->arch.components; }
  const ad::Var& logit(std::size_t i, int m) const { return net_.output(m, idx(i)); }
  const ad::Var& unit_mean(std::size_t i, int m) const {
    return net_.output(components() + m, idx(i));
  }
  /// Log-scale head before clamping.
  const ad::Var& raw_log_scale(std::size_t i, int m) const {
    return net_.output(2 * components() + m, idx(i));
  }
  /// Clamped log-scale in standardized units, recorded on first use.
  const ad::Var& log_scale(std::size_t i, int m) const;

  std::vector<ad::Var> log_weights(std::size_t i) const;
  std::vector<ad::Var> weights(std::size_t i) const;
  std::vector<GaussianTerm<ad::Var>> unit_terms(std::size_t i) const;
  /// Component mean in target units.
  ad::Var mean(std::size_t i, int m) const;

  Eigen::VectorXd gradient(const ad::Var& loss) const { return net_.gradient(loss); }

 private:
  static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }
  static Eigen::MatrixXd unit_inputs(const MdnModel& model, std::span<const double> contexts);

  const MdnModel* model_;
  std::vector<double> contexts_;
  MlpGraph net_;
  mutable std::vector<ad::Var> log_scales_;
};

}  // namespace pimdn
