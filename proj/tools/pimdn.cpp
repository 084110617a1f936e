// pimdn: generate data, train, sample and evaluate from the command line.

#include <malloc.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pimdn/checkpoint.hpp"
#include "pimdn/config.hpp"
#include "pimdn/errors.hpp"
#include "pimdn/runs.hpp"

namespace fs = std::filesystem;
using namespace pimdn;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

// Settings shared by every subcommand that builds a RunConfig.
struct ConfigFlags {
  std::string file;
  std::optional<std::string> problem;
  std::optional<std::string> model;
  std::optional<std::uint64_t> seed;
  std::optional<long> n;
  std::optional<long> iters;
  std::optional<double> lr;
  std::optional<double> lambda;
  std::optional<int> components;
  std::optional<int> hidden;
  std::optional<std::string> residual;
  std::optional<double> step;
  std::optional<int> cfm_steps;
  bool class_informed = false;
  bool force = false;
  std::string data;
  std::string out_dir;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f, bool training) {
  cmd->add_option("--config", f.file, "JSON run config; flags override its fields");
  cmd->add_option("--problem", f.problem, "bifurcation, sde, shock, chafee or circle");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--n", f.n, "points (profiles for chafee, points per regime for shock)");
  cmd->add_option("--out-dir", f.out_dir, "directory for default output names");
  if (!training) return;
  cmd->add_option("--model", f.model, "mdn or cfm");
  cmd->add_option("--data", f.data, "dataset or Hugoniot CSV; generated when absent");
  cmd->add_option("--iters", f.iters, "Adam iterations");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--lambda", f.lambda, "physics weight");
  cmd->add_option("--components", f.components, "mixture components M");
  cmd->add_option("--hidden", f.hidden, "hidden width");
  cmd->add_option("--residual", f.residual, "monotonicity, chafee_steady_state or none");
  cmd->add_option("--step", f.step, "stencil step of the residual");
  cmd->add_option("--cfm-steps", f.cfm_steps, "Euler steps of the flow sampler");
  cmd->add_flag("--class-informed", f.class_informed, "class-informed likelihood");
  cmd->add_flag("--force", f.force, "allow a residual foreign to the problem");
}

RunConfig resolve(const ConfigFlags& f) {
  nlohmann::json j = nlohmann::json::object();
  if (!f.file.empty()) j = read_json(f.file);
  if (f.problem) j["problem"] = *f.problem;
  if (f.model) j["model"] = *f.model;
  RunConfig c = run_config_from_json(j);
  if (f.seed) c.seed = *f.seed;
  if (f.n) c.n = *f.n;
  if (f.iters) c.iterations = *f.iters;
  if (f.lr) c.lr = *f.lr;
  if (f.lambda) c.lambda = *f.lambda;
  if (f.components) {
    c.components = *f.components;
    if (!j.contains("class_map")) {
      c.class_map.clear();
      for (int k = 1; k <= c.components; ++k) c.class_map.push_back(k);
    }
  }
  if (f.hidden) c.hidden_width = *f.hidden;
  if (f.residual) {
    if (*f.residual == "none") {
      c.residual.enabled = false;
    } else {
      c.residual.enabled = true;
      c.residual.kind = residual_kind_from_string(*f.residual);
    }
  }
  if (f.step) c.residual.step = *f.step;
  if (f.cfm_steps) c.cfm_steps = *f.cfm_steps;
  if (f.class_informed) {
    c.class_mode = ClassMode::class_informed;
    if (c.class_map.empty()) {
      for (int k = 1; k <= 3; ++k) c.class_map.push_back(k);
    }
  }
  if (f.force) c.force = true;
  if (!f.data.empty()) c.data = f.data;
  if (!f.out_dir.empty()) c.out_dir = f.out_dir;
  validate(c);
  return c;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw InvalidConfig("bad number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// "a,b,c" or a grid "lo:hi:count".
std::vector<double> parse_contexts(const std::string& list, const std::string& grid) {
  if (!grid.empty()) {
    std::string g = grid;
    std::replace(g.begin(), g.end(), ':', ',');
    const std::vector<double> v = parse_list(g);
    if (v.size() != 3 || v[2] < 1) throw InvalidConfig("--grid expects lo:hi:count");
    return linspace(v[0], v[1], static_cast<std::size_t>(v[2]));
  }
  if (list.empty()) return {};
  return parse_list(list);
}

std::string stem(const RunConfig& c) {
  return to_string(c.problem) + "_" + to_string(c.model) + "_seed" + std::to_string(c.seed);
}

int cmd_gen(const ConfigFlags& f, std::string out) {
  const RunConfig c = resolve(f);
  if (out.empty()) {
    out = (fs::path(c.out_dir) / (to_string(c.problem) + "_seed" + std::to_string(c.seed) + ".csv"))
              .string();
  }
  const Dataset data = generate(c);
  write_dataset_csv(out, data);
  nlohmann::json side = {{"problem", to_string(c.problem)},
                         {"seed", c.seed},
                         {"records", data.size()},
                         {"generator", to_json(c).at("generator").value(to_string(c.problem), nlohmann::json::object())},
                         {"n", c.n},
                         {"metadata", data.metadata},
                         {"config_hash", config_hash(c)}};
  write_json(out + ".json", side);
  std::cout << "wrote " << data.size() << " records to " << out << "\n";
  return 0;
}

int train_one(const RunConfig& c, const std::string& out_arg, const std::string& log_arg,
              const std::string& suffix) {
  const fs::path dir(c.out_dir);
  const std::string ckpt_path =
      out_arg.empty() ? (dir / (stem(c) + ".ckpt.json")).string() : out_arg + suffix;
  const std::string log_path =
      log_arg.empty() ? (dir / (stem(c) + ".log.csv")).string() : log_arg + suffix;
  if (!dir.empty()) fs::create_directories(dir);
  const Dataset data = load_or_generate(c);
  TrainLog log;
  try {
    Checkpoint ckpt = train_run(c, data, log);
    ckpt.config.checkpoint = ckpt_path;
    ckpt.config.log = log_path;
    save_checkpoint(ckpt_path, ckpt);
    write_log_csv(log_path, log);
  } catch (const NumericError&) {
    write_log_csv(log_path, log);
    throw;
  }
  std::cout << to_string(c.problem) << " " << to_string(c.model) << " seed " << c.seed << ": "
            << log.size() << " iterations, nll " << log.nll.back() << ", physics "
            << log.physics.back() << ", total " << log.total.back() << "\n"
            << "checkpoint " << ckpt_path << "\nlog " << log_path << "\n";
  return 0;
}

int cmd_train(const ConfigFlags& f, const std::string& out, const std::string& log_path,
              const std::string& sweep, const std::string& save_config) {
  const RunConfig base = resolve(f);
  if (!save_config.empty()) write_json(save_config, to_json(base));
  if (sweep.empty()) return train_one(base, out, log_path, "");
  const std::string prefix = "seeds=";
  if (sweep.rfind(prefix, 0) != 0) throw InvalidConfig("--sweep expects seeds=a,b,...");
  for (double s : parse_list(sweep.substr(prefix.size()))) {
    if (s < 0 || s != static_cast<double>(static_cast<std::uint64_t>(s))) {
      throw InvalidConfig("sweep seeds must be nonnegative integers");
    }
    RunConfig c = base;
    c.seed = static_cast<std::uint64_t>(s);
    train_one(c, out, log_path, ".seed" + std::to_string(c.seed));
  }
  return 0;
}

int cmd_sample(const std::string& ckpt_path, const std::vector<double>& contexts, long n,
               std::uint64_t seed, std::optional<int> steps, std::string out) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (steps) ckpt.config.cfm_steps = *steps;
  if (n < 0) throw InvalidConfig("--n must be nonnegative");
  if (out.empty()) out = (fs::path(ckpt.config.out_dir) / (stem(ckpt.config) + ".samples.csv")).string();
  const SampleSet s = sample_checkpoint(ckpt, contexts, static_cast<std::size_t>(n), seed);
  write_samples_csv(out, s);
  std::cout << "wrote " << s.sample.size() << " samples to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::vector<double>& contexts, long samples,
             std::uint64_t seed, std::string out_dir) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (samples < 0) throw InvalidConfig("--samples must be nonnegative");
  if (out_dir.empty()) out_dir = (fs::path(ckpt.config.out_dir) / (stem(ckpt.config) + "_eval")).string();
  EvalOptions opt;
  opt.contexts = contexts;
  opt.samples = static_cast<std::size_t>(samples);
  opt.seed = seed;
  const nlohmann::json report = evaluate(ckpt, opt, out_dir);
  std::cout << "report " << (fs::path(out_dir) / "report.json").string() << "\n";
  for (const auto& e : report.at("per_context")) {
    std::cout << "  context " << e.at("context").get<double>();
    if (e.contains("l1_vs_oracle")) std::cout << "  L1 " << e.at("l1_vs_oracle").get<double>();
    if (e.contains("inter_mode_mass")) {
      std::cout << "  inter-mode mass " << e.at("inter_mode_mass").get<double>();
    }
    std::cout << "\n";
  }
  for (const auto& [k, v] : report.at("metrics").items()) std::cout << "  " << k << " " << v.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // Training allocates and frees the same large buffers every iteration.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"Physics-informed mixture density networks"};
  app.require_subcommand(1);

  ConfigFlags gen_flags;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "generate a dataset CSV with a JSON sidecar");
  add_config_flags(gen, gen_flags, false);
  gen->add_option("--out", gen_out, "output CSV");

  ConfigFlags train_flags;
  std::string train_out, train_log, sweep, save_config;
  auto* tr = app.add_subcommand("train", "train an MDN or flow matching model");
  add_config_flags(tr, train_flags, true);
  tr->add_option("--out", train_out, "checkpoint JSON");
  tr->add_option("--log", train_log, "training log CSV");
  tr->add_option("--sweep", sweep, "seeds=a,b,... trains one run per seed");
  tr->add_option("--save-config", save_config, "write the resolved config");

  std::string sample_ckpt, sample_contexts, sample_grid, sample_out;
  long sample_n = 1000;
  std::uint64_t sample_seed = 0;
  std::optional<int> sample_steps;
  auto* sa = app.add_subcommand("sample", "draw samples from a checkpoint");
  sa->add_option("--checkpoint", sample_ckpt, "checkpoint JSON")->required();
  sa->add_option("--contexts", sample_contexts, "comma separated contexts");
  sa->add_option("--grid", sample_grid, "equispaced contexts lo:hi:count");
  sa->add_option("--n", sample_n, "samples per context");
  sa->add_option("--seed", sample_seed, "sampling seed");
  sa->add_option("--steps", sample_steps, "Euler steps (flow matching)");
  sa->add_option("--out", sample_out, "samples CSV");

  std::string eval_ckpt, eval_contexts, eval_grid, eval_out;
  long eval_samples = 5000;
  std::uint64_t eval_seed = 0;
  auto* ev = app.add_subcommand("eval", "metrics and plot data for a checkpoint");
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint JSON")->required();
  ev->add_option("--contexts", eval_contexts, "comma separated contexts");
  ev->add_option("--grid", eval_grid, "equispaced contexts lo:hi:count");
  ev->add_option("--samples", eval_samples, "samples per context");
  ev->add_option("--seed", eval_seed, "sampling seed");
  ev->add_option("--out-dir", eval_out, "report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*gen) return cmd_gen(gen_flags, gen_out);
    if (*tr) return cmd_train(train_flags, train_out, train_log, sweep, save_config);
    if (*sa) {
      return cmd_sample(sample_ckpt, parse_contexts(sample_contexts, sample_grid), sample_n,
                        sample_seed, sample_steps, sample_out);
    }
    if (*ev) {
      return cmd_eval(eval_ckpt, parse_contexts(eval_contexts, eval_grid), eval_samples,
                      eval_seed, eval_out);
    }
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
