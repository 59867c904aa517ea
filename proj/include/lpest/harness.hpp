#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace lpest {

// A resolved or partial experiment configuration. JSON file layout:
//   {"experiment": name, "params": {...}, "levels": [...], "seed": n, "out": dir}
struct ExperimentConfig {
  std::string experiment;
  nlohmann::json params = nlohmann::json::object();
  std::vector<double> levels;  // grid steps or time steps for sweeps; empty = experiment default
  std::uint64_t seed = 20240601;
  std::string out_dir;  // empty = $LAB_OUT_DIR/<experiment> or lab-output/<experiment>
};

// Registered experiments (canonical names) and accepted aliases.
std::vector<std::string> experiment_names();
std::string canonical_experiment(std::string_view name);
// One-line description per canonical experiment.
std::string experiment_description(std::string_view name);
// Default parameters; every accepted key appears here.
nlohmann::json default_params(std::string_view experiment);

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
// "key=value"; value is parsed as JSON when it is valid JSON, else kept as a string.
void apply_override(ExperimentConfig& config, std::string_view assignment);

// Canonical name, defaults filled in, unknown keys and mistyped values
// rejected, output directory chosen.
ExperimentConfig resolve(const ExperimentConfig& config);
nlohmann::json to_json(const ExperimentConfig& config);

std::uint64_t fnv1a64(std::string_view bytes);
// FNV-1a of the canonical JSON of the resolved config without the output directory.
std::string config_hash(const ExperimentConfig& resolved);
std::string code_version();
std::filesystem::path default_output_root();

struct RunResult {
  std::filesystem::path out_dir;
  std::vector<std::string> files;  // relative to out_dir, manifest last
  nlohmann::json summary;
};

// Runs one experiment and writes CSV/JSON outputs plus manifest.json.
// ValidationError and NumericalError propagate with the experiment name prefixed.
RunResult run_experiment(const ExperimentConfig& config);

struct SweepTable {
  std::string quantity;
  std::vector<double> levels;
  std::vector<double> values;
  std::vector<double> errors;       // against the exact value; empty for Monte Carlo
  std::vector<double> std_errors;   // Monte Carlo only
  std::vector<double> observed_order;  // per consecutive pair
  std::vector<bool> consistent;        // per consecutive pair
  bool converged = true;
};

// quantity (params "quantity"): manufactured-elliptic, manufactured-parabolic
// or mc-exit-time. Needs at least two levels.
SweepTable convergence_sweep(const ExperimentConfig& config, const std::vector<double>& levels);

}  // namespace lpest
