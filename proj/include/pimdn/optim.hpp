#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pimdn/dataset.hpp"
#include "pimdn/losses.hpp"
#include "pimdn/mdn.hpp"

namespace pimdn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
  AdamState() = default;
  AdamState(Eigen::Index n, AdamConfig config)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)), hp(config) {}

  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  AdamConfig hp;
};

/// One bias-corrected Adam update. Throws NonFiniteGradient (iteration =
/// the step about to be taken) and leaves params and state untouched if any
/// gradient entry is not finite.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state);

struct TrainLog {
  std::vector<long> iteration;
  std::vector<double> nll;  // data term (flow-matching regression loss for CFM runs)
  std::vector<double> physics;
  std::vector<double> total;

  std::size_t size() const { return iteration.size(); }
  void append(long it, double data_term, double physics_term, double total_term);
  /// Mean total loss over iterations [first, first + count).
  double mean_total(std::size_t first, std::size_t count) const;
};

/// CSV with header `iteration,nll,physics,total`.
void write_log_csv(std::ostream& out, const TrainLog& log);
void write_log_csv(const std::filesystem::path& path, const TrainLog& log);

struct TrainConfig {
  long iterations = 20000;
  AdamConfig adam;
  double lambda = 1.0;
  std::optional<ResidualSpec> residual;
  ClassMode class_mode = ClassMode::none;
  ClassMap class_map;
  /// Equispaced points added to the training contexts to form the collocation set.
  int collocation_grid = 256;
  /// Explicit collocation set; replaces the default when nonempty.
  std::vector<double> collocation;
  /// Refit the model's standardization to the data before training.
  bool standardize = true;
  GradientPath path = GradientPath::layered;
};

/// Full-batch training of `model` on `data`. On NonFiniteGradient the log
/// holds every completed iteration.
MdnModel train(MdnModel model, const Dataset& data, const TrainConfig& config, TrainLog& log);

struct TrainResult {
  MdnModel model;
  TrainLog log;
};

TrainResult train(MdnModel model, const Dataset& data, const TrainConfig& config);

/// The loss setup train() uses for a dataset (collocation resolved).
LossSetup make_loss_setup(const Dataset& data, const TrainConfig& config);

}  // namespace pimdn
