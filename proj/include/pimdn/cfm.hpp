#pragma once

// Conditional flow matching baseline. The velocity network sees
// (u_t, t, context) with u and context standardized like the MDN, and the
// flow runs from a standard normal at t = 0 to the data at t = 1.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pimdn/dataset.hpp"
#include "pimdn/mlp.hpp"
#include "pimdn/optim.hpp"
#include "pimdn/random.hpp"

namespace pimdn {

struct CfmArchitecture {
  int context_dim = 1;
  int hidden_width = 20;
  int hidden_layers = 2;

  /// Inputs (u, t, context...), one velocity output.
  MlpLayout layout() const { return MlpLayout{2 + context_dim, hidden_width, hidden_layers, 1}; }

  friend bool operator==(const CfmArchitecture&, const CfmArchitecture&) = default;
};

std::size_t param_count(const CfmArchitecture& arch);

struct CfmModel {
  CfmArchitecture arch;
  Eigen::VectorXd params;
  Standardization scaling;
};

/// Same scheme as the MDN: U(-sqrt(1/fan_in), sqrt(1/fan_in)) weights, zero biases.
CfmModel init_cfm(const CfmArchitecture& arch, std::uint64_t seed);

struct BridgePoint {
  double point;     // (1 - t) u0 + t u1
  double velocity;  // u1 - u0
};

BridgePoint bridge(double u0, double u1, double t);

/// Base draw and time for every record of a batch.
struct CfmDraws {
  std::vector<double> u0;
  std::vector<double> t;
};

/// Per record in order: u0 = normal(), then t = uniform().
CfmDraws draw_cfm(std::size_t n, Rng& rng);

/// The draws train_cfm uses at iteration `it`.
CfmDraws training_draws(std::size_t n, std::uint64_t seed, long it);

/// Velocity field in standardized units at (u, t, unit context) columns.
Eigen::VectorXd cfm_velocity(const CfmModel& model, std::span<const double> u,
                             std::span<const double> t, std::span<const double> unit_context);

/// mean (v(u_t, t, x) - (u1 - u0))^2 in standardized units.
double cfm_loss(const CfmModel& model, const Dataset& batch, const CfmDraws& draws);
/// Same with draws from Rng(seed).
double cfm_loss(const CfmModel& model, const Dataset& batch, std::uint64_t seed);

struct CfmLossGrad {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

CfmLossGrad cfm_loss_gradient(const CfmModel& model, const Dataset& batch, const CfmDraws& draws,
                              GradientPath path = GradientPath::layered);

struct CfmTrainConfig {
  long iterations = 20000;
  AdamConfig adam;
  std::uint64_t seed = 0;
  bool standardize = true;
  GradientPath path = GradientPath::layered;
};

/// Full batch, fresh draws every iteration. The log's nll column holds the
/// regression loss, physics is 0.
CfmModel train_cfm(CfmModel model, const Dataset& data, const CfmTrainConfig& config,
                   TrainLog& log);

/// Forward Euler from u(0) ~ N(0, 1), dt = 1 / steps, one draw per context in
/// order. Returns u(1) in target units; SamplerDiverged on a non-finite state.
std::vector<double> cfm_sample(const CfmModel& model, std::span<const double> contexts, int steps,
                               Rng& rng);
/// Same from given initial states (standardized units).
std::vector<double> cfm_flow(const CfmModel& model, std::span<const double> contexts,
                             std::span<const double> u0, int steps);
double cfm_sample(const CfmModel& model, double context, int steps, Rng& rng);

}  // namespace pimdn
