// lab <experiment> [--config file] [--set key=value]... [--out dir] [--seed n]
// Precedence: experiment defaults < config file < --set < dedicated flags.

#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "lpest/core.hpp"
#include "lpest/harness.hpp"

namespace {

using nlohmann::json;

json number_list(const std::string& text) {
  json out = json::array();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw lpest::ValidationError("not a number list: " + text);
    }
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"lab: reproducible experiments for the lpest library"};
  app.set_version_flag("--version", lpest::code_version());
  std::string experiment, config_file, out_dir, levels;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool list = false;
  app.add_option("experiment", experiment, "experiment name (see --list)");
  app.add_flag("--list", list, "list experiments and their parameters");
  app.add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "override a parameter, key=value (value parsed as JSON when valid)");
  app.add_option("--out", out_dir, "output directory (default $LAB_OUT_DIR/<experiment> or lab-output/<experiment>)");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--levels", levels, "comma-separated grid or time steps for sweeps");

  // Dedicated flags mapped onto parameter keys.
  struct Flag {
    const char* name;
    const char* key;
    bool list;
    std::optional<std::string> value;
  };
  std::vector<Flag> flags{{"--paths", "paths", false, {}},   {"--dt", "dt", false, {}},
                          {"--domain", "domain", false, {}}, {"--example", "example", false, {}},
                          {"--delta", "delta", false, {}},   {"--cap-K", "K", false, {}},
                          {"--grid", "h", false, {}},        {"--mu-grid", "mu_grid", true, {}},
                          {"--M", "M", false, {}},           {"--p", "p", false, {}},
                          {"--branch", "branch", false, {}}, {"--threads", "threads", false, {}}};
  for (auto& f : flags) app.add_option(f.name, f.value, std::string("sets parameter ") + f.key);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (list) {
    for (const auto& name : lpest::experiment_names()) {
      std::cout << name << ": " << lpest::experiment_description(name) << "\n";
      const json defaults = lpest::default_params(name);
      for (const auto& [k, v] : defaults.items()) std::cout << "    " << k << " = " << v.dump() << "\n";
    }
    return 0;
  }
  if (experiment.empty()) throw lpest::ValidationError("no experiment given (try --list)");

  lpest::ExperimentConfig config;
  if (!config_file.empty()) config = lpest::load_config(config_file);
  if (!config.experiment.empty() &&
      lpest::canonical_experiment(config.experiment) != lpest::canonical_experiment(experiment))
    throw lpest::ValidationError("config file is for experiment " + config.experiment);
  config.experiment = experiment;
  for (const auto& s : sets) lpest::apply_override(config, s);
  for (const auto& f : flags) {
    if (!f.value) continue;
    if (f.list) {
      config.params[f.key] = number_list(*f.value);
    } else {
      lpest::apply_override(config, std::string(f.key) + "=" + *f.value);
    }
  }
  if (!levels.empty()) config.levels = number_list(levels).get<std::vector<double>>();
  if (seed) config.seed = *seed;
  if (!out_dir.empty()) config.out_dir = out_dir;

  const lpest::RunResult r = lpest::run_experiment(config);
  std::cout << r.summary.dump(2) << "\n";
  std::cerr << "wrote " << r.files.size() << " files to " << r.out_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const lpest::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lpest::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
