#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "pimdn/cfm.hpp"
#include "pimdn/losses.hpp"
#include "pimdn/mdn.hpp"
#include "pimdn/optim.hpp"
#include "pimdn/problems.hpp"

namespace pimdn {

enum class Problem { bifurcation, sde, shock, chafee, circle };
enum class ModelKind { mdn, cfm };

std::string to_string(Problem p);
Problem problem_from_string(const std::string& name);
std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& name);

/// Physics term settings as stored in a run config.
struct ResidualConfig {
  bool enabled = false;
  ResidualKind kind = ResidualKind::monotonicity;
  double step = 1e-2;
  /// true: step is in standardized context units (scaled by the context std).
  bool standardized_step = true;
  double nu = 0.16;
  /// "default" (contexts plus a uniform grid) or "grid" (the solver's interior points).
  std::string collocation = "default";
  int collocation_grid = 256;

  friend bool operator==(const ResidualConfig&, const ResidualConfig&) = default;
};

/// Everything a gen/train/sample/eval invocation needs.
struct RunConfig {
  Problem problem = Problem::bifurcation;
  ModelKind model = ModelKind::mdn;
  int components = 3;
  int hidden_width = 16;
  int hidden_layers = 2;
  long iterations = 20000;
  double lr = 1e-3;
  double lambda = 1.0;
  ResidualConfig residual;
  ClassMode class_mode = ClassMode::none;
  std::vector<int> class_map{1, 2, 3};
  std::uint64_t seed = 0;
  bool force = false;  // allow a residual kind that does not belong to the problem

  // data generation; `n` is points (bifurcation, sde), profiles (chafee),
  // points per regime (shock) or points (circle)
  long n = 5000;
  BifurcationConfig bifurcation;
  SdeParams sde;
  ChafeeParams chafee;
  HugoniotSurrogate hugoniot;
  CircleConfig circle;

  int cfm_steps = 100;

  // files
  std::string data;
  std::string checkpoint;
  std::string log;
  std::string out_dir = ".";
};

/// Problem defaults: component count, width, iteration count, physics term.
RunConfig defaults_for(Problem problem, ModelKind model = ModelKind::mdn);

/// Throws InvalidConfig on inconsistent settings.
void validate(const RunConfig& config);

nlohmann::json to_json(const RunConfig& config);
/// Fields absent from `j` keep the defaults of its problem and model.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Applies the fields present in `j` on top of `base`.
void merge_json(RunConfig& base, const nlohmann::json& j);

/// FNV-1a 64 over the compact dump of to_json(), as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Generates the problem's dataset with the config's seed.
Dataset generate(const RunConfig& config);

/// Training setup for an MDN run on `data`, with the stencil step resolved
/// into context units.
TrainConfig train_config(const RunConfig& config, const Dataset& data);
CfmTrainConfig cfm_train_config(const RunConfig& config);
Architecture mdn_architecture(const RunConfig& config);
CfmArchitecture cfm_architecture(const RunConfig& config);

/// Interior grid points of the Chafee solver.
std::vector<double> chafee_interior_grid(const ChafeeParams& params);

}  // namespace pimdn
