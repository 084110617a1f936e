#include "pimdn/runs.hpp"

#include <algorithm>
#include <fstream>
#include <numbers>
#include <optional>

#include "pimdn/errors.hpp"
#include "pimdn/eval.hpp"

namespace pimdn {

Dataset load_or_generate(const RunConfig& config) {
  if (config.data.empty()) return generate(config);
  std::ifstream in(config.data, std::ios::binary);
  if (!in) throw IoError("cannot open " + config.data);
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  in.seekg(0);
  return header == "up_km_s,us_km_s,regime" ? read_hugoniot_csv(in) : read_dataset_csv(in);
}

Checkpoint train_run(const RunConfig& config, const Dataset& data, TrainLog& log) {
  validate(config);
  Checkpoint ckpt;
  ckpt.config = config;
  if (config.model == ModelKind::mdn) {
    const TrainConfig tc = train_config(config, data);
    ckpt.model = train(init_params(mdn_architecture(config), config.seed), data, tc, log);
  } else {
    ckpt.model = train_cfm(init_cfm(cfm_architecture(config), config.seed), data,
                           cfm_train_config(config), log);
  }
  ckpt.training = {{"iterations", log.size()},
                   {"records", data.size()},
                   {"config_hash", config_hash(config)}};
  if (log.size() > 0) {
    ckpt.training["final"] = {{"nll", log.nll.back()},
                              {"physics", log.physics.back()},
                              {"total", log.total.back()}};
  }
  return ckpt;
}

SampleSet sample_checkpoint(const Checkpoint& ckpt, std::span<const double> contexts,
                            std::size_t n, std::uint64_t seed) {
  SampleSet out;
  Rng rng = Rng::stream(seed, streams::sampling);
  if (ckpt.kind() == ModelKind::mdn) {
    const std::vector<MixtureParams> mps = mdn_forward_batch(ckpt.mdn(), contexts);
    for (std::size_t c = 0; c < contexts.size(); ++c) {
      for (std::size_t k = 0; k < n; ++k) {
        out.context.push_back(contexts[c]);
        out.sample.push_back(sample(mps[c], rng));
      }
    }
  } else {
    for (double x : contexts) out.context.insert(out.context.end(), n, x);
    out.sample = cfm_sample(ckpt.cfm(), out.context, ckpt.config.cfm_steps, rng);
  }
  return out;
}

void write_samples_csv(const std::filesystem::path& path, const SampleSet& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "context,sample\n";
  for (std::size_t i = 0; i < s.sample.size(); ++i) {
    out << format_double(s.context[i]) << ',' << format_double(s.sample[i]) << '\n';
  }
  if (!out) throw IoError("write to " + path.string() + " failed");
}

std::vector<double> default_eval_contexts(Problem problem) {
  switch (problem) {
    case Problem::bifurcation:
      return {-0.8, 0.0, 0.8};
    case Problem::sde:
      return {5.0, 12.0};
    case Problem::shock:
      return {1.0, 2.0, 3.0, 4.0};
    case Problem::chafee:
      return {std::numbers::pi / 4, std::numbers::pi / 2, 3 * std::numbers::pi / 4};
    case Problem::circle:
      return linspace(0.1, 0.9, 9);
  }
  return {};
}

namespace {

struct Ranges {
  double context_lo, context_hi;
  double target_lo, target_hi;
  std::size_t target_points;
};

Ranges ranges_for(const RunConfig& c) {
  switch (c.problem) {
    case Problem::bifurcation:
      return {-3.0, 3.0, -2.5, 2.5, 1001};
    case Problem::sde:
      return {0.0, 14.0, -4.0, 4.0, 1601};
    case Problem::shock:
      return {0.0, 5.0, 4.0, 22.0, 1801};
    case Problem::chafee:
      return {0.0, std::numbers::pi, -2.0, 2.0, 801};
    case Problem::circle:
      return {0.0, 1.0, -0.25, 1.25, 1501};
  }
  return {0.0, 1.0, 0.0, 1.0, 101};
}

void write_heads_csv(const std::filesystem::path& path, const MdnModel& model,
                     std::span<const double> xs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "context,component,pi,mu,sigma\n";
  const std::vector<MixtureParams> mps = mdn_forward_batch(model, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (Eigen::Index m = 0; m < mps[i].components(); ++m) {
      out << format_double(xs[i]) << ',' << m + 1 << ',' << format_double(mps[i].pi[m]) << ','
          << format_double(mps[i].mu[m]) << ',' << format_double(mps[i].sigma[m]) << '\n';
    }
  }
}

// Oracle density at a context where the problem has one.
std::optional<DensityCurve> oracle_density(const RunConfig& c, double context,
                                           std::span<const double> grid) {
  if (c.problem != Problem::sde) return std::nullopt;
  return stationary_density(context, c.sde.a3, grid);
}

std::vector<double> samples_at(const SampleSet& s, double context) {
  std::vector<double> out;
  for (std::size_t i = 0; i < s.sample.size(); ++i) {
    if (s.context[i] == context) out.push_back(s.sample[i]);
  }
  return out;
}

}  // namespace

nlohmann::json evaluate(const Checkpoint& ckpt, const EvalOptions& options,
                        const std::filesystem::path& out_dir) {
  using nlohmann::json;
  const RunConfig& c = ckpt.config;
  const bool is_mdn = ckpt.kind() == ModelKind::mdn;
  const std::vector<double> contexts =
      options.contexts.empty() ? default_eval_contexts(c.problem) : options.contexts;
  const Ranges r = ranges_for(c);
  const std::vector<double> grid = linspace(r.target_lo, r.target_hi, r.target_points);
  std::filesystem::create_directories(out_dir);

  json report = {{"problem", to_string(c.problem)},
                 {"kind", to_string(ckpt.kind())},
                 {"config_hash", config_hash(c)},
                 {"seed", c.seed},
                 {"eval_seed", options.seed},
                 {"contexts", contexts},
                 {"notes", json::array()}};
  json per_context = json::array();

  const SampleSet samples = sample_checkpoint(ckpt, contexts, options.samples, options.seed);
  write_samples_csv(out_dir / "samples.csv", samples);

  if (is_mdn) {
    write_heads_csv(out_dir / "heads.csv", ckpt.mdn(),
                    linspace(r.context_lo, r.context_hi, 201));
  } else {
    report["notes"].push_back("flow matching model: densities are sample histograms");
  }
  if (c.problem != Problem::sde) report["notes"].push_back("no density oracle for this problem");

  std::ofstream dens(out_dir / "density.csv", std::ios::binary);
  if (!dens) throw IoError("cannot write density.csv in " + out_dir.string());
  const bool has_oracle = c.problem == Problem::sde;
  dens << (has_oracle ? "context,u,model,oracle\n" : "context,u,model\n");

  for (double x : contexts) {
    json entry = {{"context", x}};
    const std::vector<double> xs = samples_at(samples, x);
    DensityCurve model_curve;
    if (is_mdn) {
      const ModelDensity md = mdn_density_curve(ckpt.mdn(), x, grid);
      model_curve = md.curve;
      entry["renormalized"] = md.renormalized;
      const MixtureParams mp = mdn_forward(ckpt.mdn(), x);
      entry["mean"] = mean(mp);
      entry["second_moment"] = second_moment(mp);
    } else {
      model_curve = histogram_density(xs, grid);
    }
    const auto oracle = oracle_density(c, x, grid);
    if (oracle) entry["l1_vs_oracle"] = density_l1(model_curve, *oracle);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      dens << format_double(x) << ',' << format_double(grid[k]) << ','
           << format_double(model_curve.density[k]);
      if (oracle) dens << ',' << format_double(oracle->density[k]);
      dens << '\n';
    }

    if (c.problem == Problem::bifurcation) {
      const std::vector<double> roots = bifurcation_roots(x);
      entry["roots"] = roots;
      const std::vector<Interval> windows = inter_root_windows(roots, 0.2);
      entry["inter_mode_mass"] = inter_mode_mass(xs, windows);
      if (is_mdn) {
        ModeReport modes = extract_modes(ckpt.mdn(), x);
        match_modes(modes, roots);
        json ms = json::array();
        for (const Mode& m : modes.modes) {
          ms.push_back({{"pi", m.pi}, {"mu", m.mu}, {"sigma", m.sigma}});
        }
        entry["modes"] = ms;
        entry["mode_errors"] = modes.error;
        entry["modes_one_to_one"] = modes.one_to_one();
        if (roots.size() == 1) {
          entry["mass_near_root"] =
              mass_in_interval(mdn_forward(ckpt.mdn(), x), roots[0] - 0.2, roots[0] + 0.2);
        }
      }
    }
    per_context.push_back(entry);
  }
  report["per_context"] = per_context;

  json metrics = json::object();
  if (is_mdn) {
    const MdnModel& model = ckpt.mdn();
    if (c.problem == Problem::shock) {
      double lo = c.hugoniot.branches[0].up_lo;
      double hi = c.hugoniot.branches[0].up_hi;
      for (const HugoniotBranch& b : c.hugoniot.branches) {
        lo = std::min(lo, b.up_lo);
        hi = std::max(hi, b.up_hi);
      }
      const double h = 1e-2 * model.scaling.context_std;
      metrics["monotonicity_violation"] = monotonicity_violation(model, linspace(lo, hi, 256), h);
      if (model.arch.components >= 3) {
        std::vector<int> assign;
        if (c.class_mode == ClassMode::class_informed) {
          const ClassMap g{c.class_map};
          for (int k = 1; k <= 3; ++k) assign.push_back(g.component(k));
        } else {
          assign = best_assignment(model, c.hugoniot.branches);
        }
        json rmse = json::array();
        for (std::size_t k = 0; k < 3; ++k) {
          rmse.push_back(branch_rmse(model, assign[k], c.hugoniot.branches[k]));
        }
        metrics["branch_components"] = assign;
        metrics["branch_rmse"] = rmse;
      }
    }
    if (c.problem == Problem::chafee) {
      const std::vector<double> xs = chafee_interior_grid(c.chafee);
      ResidualSpec spec;
      spec.kind = ResidualKind::chafee_steady_state;
      spec.nu = c.chafee.nu;
      spec.step = std::numbers::pi / (c.chafee.nx + 1);
      metrics["steady_state_residual"] = physics_violation(model, xs, spec);
      metrics["mean_sigma"] = mean_sigma(model, xs);
    }
    if (c.problem == Problem::circle) {
      metrics["suppressed_components"] = suppressed_components(model, contexts);
    }
  }
  report["metrics"] = metrics;
  write_json(out_dir / "report.json", report);
  return report;
}

}  // namespace pimdn
