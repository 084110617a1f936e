#include "pimdn/config.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "pimdn/errors.hpp"

namespace pimdn {

std::string to_string(Problem p) {
  switch (p) {
    case Problem::bifurcation:
      return "bifurcation";
    case Problem::sde:
      return "sde";
    case Problem::shock:
      return "shock";
    case Problem::chafee:
      return "chafee";
    case Problem::circle:
      return "circle";
  }
  return "unknown";
}

Problem problem_from_string(const std::string& name) {
  for (Problem p : {Problem::bifurcation, Problem::sde, Problem::shock, Problem::chafee,
                    Problem::circle}) {
    if (to_string(p) == name) return p;
  }
  throw InvalidConfig("unknown problem '" + name + "'");
}

std::string to_string(ModelKind k) { return k == ModelKind::mdn ? "mdn" : "cfm"; }

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "mdn") return ModelKind::mdn;
  if (name == "cfm") return ModelKind::cfm;
  throw InvalidConfig("unknown model kind '" + name + "'");
}

RunConfig defaults_for(Problem problem, ModelKind model) {
  RunConfig c;
  c.problem = problem;
  c.model = model;
  c.hidden_width = 32;
  switch (problem) {
    case Problem::bifurcation:
      c.components = 3;
      c.hidden_width = model == ModelKind::cfm ? 20 : 16;
      c.iterations = 20000;
      c.n = 5000;
      break;
    case Problem::sde:
      c.components = 2;
      c.iterations = 20000;
      c.n = 10000;
      break;
    case Problem::shock:
      c.components = 3;
      c.iterations = 10000;
      c.n = 30;
      c.residual.enabled = true;
      c.residual.kind = ResidualKind::monotonicity;
      c.residual.step = 1e-2;
      c.residual.standardized_step = true;
      break;
    case Problem::chafee:
      c.components = 2;
      c.iterations = 50000;
      c.n = 100;
      c.residual.enabled = true;
      c.residual.kind = ResidualKind::chafee_steady_state;
      c.residual.step = c.chafee.nx > 0 ? std::numbers::pi / (c.chafee.nx + 1) : 0.0;
      c.residual.standardized_step = false;
      c.residual.nu = c.chafee.nu;
      c.residual.collocation = "grid";
      break;
    case Problem::circle:
      c.components = 4;
      c.iterations = 5000;
      c.n = 400;
      c.seed = 10;
      break;
  }
  c.class_map.clear();
  for (int k = 1; k <= c.components; ++k) c.class_map.push_back(k);
  if (model == ModelKind::cfm) c.residual.enabled = false;
  return c;
}

void validate(const RunConfig& c) {
  if (c.iterations < 1) throw InvalidConfig("iterations must be at least 1");
  if (!(c.lr > 0.0)) throw InvalidConfig("learning rate must be positive");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) {
    throw InvalidConfig("lambda must be a finite nonnegative number");
  }
  if (c.components < 1) throw InvalidConfig("component count must be at least 1");
  if (c.hidden_width < 1 || c.hidden_layers < 1) throw InvalidConfig("invalid hidden layers");
  if (c.n < 0) throw InvalidConfig("n must be nonnegative");
  if (c.cfm_steps < 1) throw InvalidConfig("cfm steps must be at least 1");
  if (c.residual.enabled) {
    if (c.model == ModelKind::cfm) throw InvalidConfig("flow matching has no physics term");
    if (!(c.residual.step > 0.0)) throw InvalidConfig("residual step must be positive");
    if (c.residual.kind == ResidualKind::custom) {
      throw InvalidConfig("custom residuals are only available through the library");
    }
    if (c.residual.collocation != "default" && c.residual.collocation != "grid") {
      throw InvalidConfig("collocation must be 'default' or 'grid'");
    }
    if (c.residual.collocation == "grid" && c.problem != Problem::chafee) {
      throw InvalidConfig("grid collocation needs the chafee problem");
    }
    if (!c.force) {
      if (c.residual.kind == ResidualKind::chafee_steady_state && c.problem != Problem::chafee) {
        throw InvalidConfig("chafee residual on problem " + to_string(c.problem) +
                            " (pass force to override)");
      }
      if (c.residual.kind == ResidualKind::monotonicity && c.problem != Problem::shock) {
        throw InvalidConfig("monotonicity residual on problem " + to_string(c.problem) +
                            " (pass force to override)");
      }
    }
  }
  if (c.class_mode == ClassMode::class_informed) {
    if (c.model == ModelKind::cfm) throw InvalidConfig("flow matching has no class mode");
    ClassMap g{c.class_map};
    validate(g, c.components);
    if (g.classes() == 0) throw InvalidConfig("class-informed training needs a class map");
  }
}

namespace {

std::string class_mode_name(ClassMode m) {
  return m == ClassMode::class_informed ? "class_informed" : "none";
}

ClassMode class_mode_from_string(const std::string& s) {
  if (s == "none") return ClassMode::none;
  if (s == "class_informed") return ClassMode::class_informed;
  throw InvalidConfig("unknown class mode '" + s + "'");
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  json r = {{"enabled", c.residual.enabled},
            {"kind", to_string(c.residual.kind)},
            {"step", c.residual.step},
            {"standardized_step", c.residual.standardized_step},
            {"nu", c.residual.nu},
            {"collocation", c.residual.collocation},
            {"collocation_grid", c.residual.collocation_grid}};
  json gen = {
      {"bifurcation",
       {{"state_lo", c.bifurcation.state_lo},
        {"state_hi", c.bifurcation.state_hi},
        {"control_lo", c.bifurcation.control_lo},
        {"control_hi", c.bifurcation.control_hi},
        {"imperfection_bound", c.bifurcation.imperfection_bound}}},
      {"sde",
       {{"a1", c.sde.a1},
        {"a2", c.sde.a2},
        {"a3", c.sde.a3},
        {"dt", c.sde.dt},
        {"steps", c.sde.steps},
        {"u1_0", c.sde.u1_0},
        {"u2_0", c.sde.u2_0}}},
      {"chafee",
       {{"nu", c.chafee.nu}, {"t_end", c.chafee.t_end}, {"nx", c.chafee.nx}, {"dt", c.chafee.dt}}},
      {"circle",
       {{"r_in", c.circle.r_in}, {"r_out", c.circle.r_out}, {"cx", c.circle.cx},
        {"cy", c.circle.cy}}},
  };
  json branches = json::array();
  for (const HugoniotBranch& b : c.hugoniot.branches) {
    branches.push_back({{"intercept", b.intercept},
                        {"slope", b.slope},
                        {"up_lo", b.up_lo},
                        {"up_hi", b.up_hi}});
  }
  gen["shock"] = {{"scatter", c.hugoniot.scatter}, {"branches", branches}};
  return {{"problem", to_string(c.problem)},
          {"model", to_string(c.model)},
          {"components", c.components},
          {"hidden_width", c.hidden_width},
          {"hidden_layers", c.hidden_layers},
          {"iterations", c.iterations},
          {"lr", c.lr},
          {"lambda", c.lambda},
          {"residual", r},
          {"class_mode", class_mode_name(c.class_mode)},
          {"class_map", c.class_map},
          {"seed", c.seed},
          {"force", c.force},
          {"n", c.n},
          {"generator", gen},
          {"cfm_steps", c.cfm_steps},
          {"data", c.data},
          {"checkpoint", c.checkpoint},
          {"log", c.log},
          {"out_dir", c.out_dir}};
}

void merge_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
  try {
    if (j.contains("problem")) c.problem = problem_from_string(j.at("problem").get<std::string>());
    if (j.contains("model")) c.model = model_kind_from_string(j.at("model").get<std::string>());
    take(j, "components", c.components);
    take(j, "hidden_width", c.hidden_width);
    take(j, "hidden_layers", c.hidden_layers);
    take(j, "iterations", c.iterations);
    take(j, "lr", c.lr);
    take(j, "lambda", c.lambda);
    if (j.contains("residual")) {
      const auto& r = j.at("residual");
      take(r, "enabled", c.residual.enabled);
      if (r.contains("kind")) c.residual.kind = residual_kind_from_string(r.at("kind").get<std::string>());
      take(r, "step", c.residual.step);
      take(r, "standardized_step", c.residual.standardized_step);
      take(r, "nu", c.residual.nu);
      take(r, "collocation", c.residual.collocation);
      take(r, "collocation_grid", c.residual.collocation_grid);
    }
    if (j.contains("class_mode")) {
      c.class_mode = class_mode_from_string(j.at("class_mode").get<std::string>());
    }
    take(j, "class_map", c.class_map);
    take(j, "seed", c.seed);
    take(j, "force", c.force);
    take(j, "n", c.n);
    if (j.contains("generator")) {
      const auto& g = j.at("generator");
      if (g.contains("bifurcation")) {
        const auto& b = g.at("bifurcation");
        take(b, "state_lo", c.bifurcation.state_lo);
        take(b, "state_hi", c.bifurcation.state_hi);
        take(b, "control_lo", c.bifurcation.control_lo);
        take(b, "control_hi", c.bifurcation.control_hi);
        take(b, "imperfection_bound", c.bifurcation.imperfection_bound);
      }
      if (g.contains("sde")) {
        const auto& s = g.at("sde");
        take(s, "a1", c.sde.a1);
        take(s, "a2", c.sde.a2);
        take(s, "a3", c.sde.a3);
        take(s, "dt", c.sde.dt);
        take(s, "steps", c.sde.steps);
        take(s, "u1_0", c.sde.u1_0);
        take(s, "u2_0", c.sde.u2_0);
      }
      if (g.contains("chafee")) {
        const auto& s = g.at("chafee");
        take(s, "nu", c.chafee.nu);
        take(s, "t_end", c.chafee.t_end);
        take(s, "nx", c.chafee.nx);
        take(s, "dt", c.chafee.dt);
      }
      if (g.contains("circle")) {
        const auto& s = g.at("circle");
        take(s, "r_in", c.circle.r_in);
        take(s, "r_out", c.circle.r_out);
        take(s, "cx", c.circle.cx);
        take(s, "cy", c.circle.cy);
      }
      if (g.contains("shock")) {
        const auto& s = g.at("shock");
        take(s, "scatter", c.hugoniot.scatter);
        if (s.contains("branches")) {
          const auto& bs = s.at("branches");
          if (!bs.is_array() || bs.size() != 3) throw InvalidConfig("shock needs three branches");
          for (std::size_t k = 0; k < 3; ++k) {
            take(bs[k], "intercept", c.hugoniot.branches[k].intercept);
            take(bs[k], "slope", c.hugoniot.branches[k].slope);
            take(bs[k], "up_lo", c.hugoniot.branches[k].up_lo);
            take(bs[k], "up_hi", c.hugoniot.branches[k].up_hi);
          }
        }
      }
    }
    take(j, "cfm_steps", c.cfm_steps);
    take(j, "data", c.data);
    take(j, "checkpoint", c.checkpoint);
    take(j, "log", c.log);
    take(j, "out_dir", c.out_dir);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("malformed config: ") + e.what());
  }
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
  Problem p = Problem::bifurcation;
  ModelKind k = ModelKind::mdn;
  try {
    if (j.contains("problem")) p = problem_from_string(j.at("problem").get<std::string>());
    if (j.contains("model")) k = model_kind_from_string(j.at("model").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("malformed config: ") + e.what());
  }
  RunConfig c = defaults_for(p, k);
  merge_json(c, j);
  return c;
}

std::string config_hash(const RunConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset generate(const RunConfig& c) {
  validate(c);
  switch (c.problem) {
    case Problem::bifurcation:
      return gen_bifurcation(static_cast<std::size_t>(c.n), c.seed, c.bifurcation);
    case Problem::sde: {
      const SdeTrajectory traj = simulate_sde(c.sde, c.seed);
      return gen_sde_dataset(traj, static_cast<std::size_t>(c.n), c.seed);
    }
    case Problem::chafee:
      return gen_chafee_dataset(static_cast<int>(c.n), c.chafee, c.seed);
    case Problem::shock: {
      HugoniotSurrogate h = c.hugoniot;
      h.n_per_regime = static_cast<int>(c.n);
      return gen_hugoniot_surrogate(h, c.seed);
    }
    case Problem::circle: {
      CircleConfig cc = c.circle;
      cc.n = static_cast<int>(c.n);
      return gen_circle(cc, c.seed);
    }
  }
  throw InvalidConfig("unknown problem");
}

std::vector<double> chafee_interior_grid(const ChafeeParams& params) {
  const std::vector<double> x =
      linspace(0.0, std::numbers::pi, static_cast<std::size_t>(params.nx) + 2);
  return {x.begin() + 1, x.end() - 1};
}

Architecture mdn_architecture(const RunConfig& c) {
  Architecture a;
  a.hidden_width = c.hidden_width;
  a.hidden_layers = c.hidden_layers;
  a.components = c.components;
  return a;
}

CfmArchitecture cfm_architecture(const RunConfig& c) {
  CfmArchitecture a;
  a.hidden_width = c.hidden_width;
  a.hidden_layers = c.hidden_layers;
  return a;
}

TrainConfig train_config(const RunConfig& c, const Dataset& data) {
  validate(c);
  TrainConfig t;
  t.iterations = c.iterations;
  t.adam.lr = c.lr;
  t.lambda = c.lambda;
  t.class_mode = c.class_mode;
  t.class_map = ClassMap{c.class_map};
  if (c.residual.enabled) {
    ResidualSpec spec;
    spec.kind = c.residual.kind;
    spec.nu = c.residual.nu;
    spec.step = c.residual.step;
    if (c.residual.standardized_step) spec.step *= fit_standardization(data).context_std;
    t.residual = spec;
    t.collocation_grid = c.residual.collocation_grid;
    if (c.residual.collocation == "grid") t.collocation = chafee_interior_grid(c.chafee);
  }
  return t;
}

CfmTrainConfig cfm_train_config(const RunConfig& c) {
  validate(c);
  CfmTrainConfig t;
  t.iterations = c.iterations;
  t.adam.lr = c.lr;
  t.seed = c.seed;
  return t;
}

}  // namespace pimdn
