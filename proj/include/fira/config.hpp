#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fira/train.hpp"

namespace fira {

// Method names accepted in configs: the optimizer kinds plus the ablation
// variants fira-matrix, fira-w.o.-scaling, fira-w.o.-limiter and
// fira-gradient-clipping.
std::vector<std::string> known_methods();

// Sets kind, scaling and smoothing for `method`. Throws ConfigError.
OptimizerSpec apply_method(OptimizerSpec base, const std::string& method);

// True for methods whose state depends on the rank.
bool method_uses_rank(const std::string& method);

struct CompareSpec {
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds;
  // Empty: run each method once at [optimizer] rank.
  std::vector<std::size_t> ranks;
  std::string output = "comparison.csv";
};

struct RunConfig {
  TrainConfig train;
  std::string method = "fira";
  std::filesystem::path output_dir = ".";
  std::string metrics_file = "metrics.csv";
  std::string summary_file = "summary.json";
  CompareSpec compare;
};

// Environment variable that overrides [output] dir.
inline constexpr const char* kOutputDirEnv = "FIRA_OUTPUT_DIR";

// Parses an INI-style file:
//
//   [run]        steps, seed, warmup_fraction
//   [task]       kind, dim, input_dim, output_dim, teacher_hidden, batch,
//                noise, spike_steps, spike_amplification, spike_matrix
//   [model]      hidden, activation, loss
//   [optimizer]  method, learning_rate, beta1, beta2, epsilon, alpha,
//                gamma, clip_threshold, rank, switch_period,
//                galore_add_scale_residual
//   [output]     dir, metrics, summary
//   [compare]    methods, seeds, ranks, output
//
// Lists are comma separated. Unknown sections or keys are errors. Throws
// ConfigError (including for a missing file).
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text);

}  // namespace fira
