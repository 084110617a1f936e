#pragma once

// End-to-end steps shared by the command-line tool and the acceptance suite.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "pimdn/checkpoint.hpp"
#include "pimdn/config.hpp"
#include "pimdn/optim.hpp"

namespace pimdn {

/// Data for a run: the file named by config.data when set (Hugoniot or
/// dataset CSV, by header), generated otherwise.
Dataset load_or_generate(const RunConfig& config);

/// Initializes and trains the configured model. `log` keeps every completed
/// iteration when NonFiniteGradient propagates.
Checkpoint train_run(const RunConfig& config, const Dataset& data, TrainLog& log);

struct SampleSet {
  std::vector<double> context;
  std::vector<double> sample;
};

/// `n` draws per context from stream streams::sampling of `seed`, grouped by context.
SampleSet sample_checkpoint(const Checkpoint& ckpt, std::span<const double> contexts,
                            std::size_t n, std::uint64_t seed);

/// CSV `context,sample`.
void write_samples_csv(const std::filesystem::path& path, const SampleSet& s);

/// Evaluation contexts used when none are given.
std::vector<double> default_eval_contexts(Problem problem);

struct EvalOptions {
  std::vector<double> contexts;
  std::size_t samples = 5000;
  std::uint64_t seed = 0;
};

/// Metrics report; writes heads.csv, density.csv, samples.csv and report.json into `out_dir`.
nlohmann::json evaluate(const Checkpoint& ckpt, const EvalOptions& options,
                        const std::filesystem::path& out_dir);

}  // namespace pimdn
