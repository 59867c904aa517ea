#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "lpest/core.hpp"
#include "lpest/domain.hpp"
#include "lpest/estimates.hpp"
#include "lpest/operator.hpp"

namespace lpest {

enum class ExitRule {
  kBridge,    // step outside, or a Brownian-bridge crossing between inside endpoints
  kDiscrete,  // first step whose endpoint is outside
};

// Additive functional int_0^tau e^{-discount t} f(t, x_t) dt accumulated while simulating.
struct PathFunctional {
  std::string name;
  ScalarFn f;
  double discount = 0.0;
};

// dx = sigma dw + b dt with d1 = d and sigma symmetric.
struct SimConfig {
  int dim = 2;
  MatrixFn sigma;
  VectorFn b;
  Domain domain = Domain::ball(2, 1.0);
  // Start point; the ball center (or cylinder axis at t0) when unset.
  std::optional<Vec2> start;
  double dt = 1e-3;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 0;
  ExitRule exit_rule = ExitRule::kBridge;
  // Ellipticity of a = sigma sigma^T / 2, used for the default time cap.
  double delta = 1.0;
  // Hard cap on path time; <= 0 selects 10 x height (cylinders) or 10 x diam^2/delta (balls).
  double time_cap = 0.0;
  std::vector<PathFunctional> functionals;
  bool store_paths = false;
  // Worker count for the parallel kernel; 0 uses the OpenMP default.
  int threads = 0;
};

// sigma = sqrt(2 a), b from the operator; c must vanish.
SimConfig config_from_operator(const OperatorSpec& spec, const Domain& domain, double dt,
                               std::size_t n_paths, std::uint64_t seed);

struct PathRecord {
  double exit_time = 0.0;
  std::uint32_t steps = 0;
  bool capped = false;
};

struct PathEnsemble {
  SimConfig config;
  std::vector<PathRecord> paths;
  // values[j][i]: functional j on path i.
  std::vector<std::vector<double>> values;
  // Positions x_0 .. x_N per path, when store_paths is set.
  std::vector<std::vector<Vec2>> positions;
  std::size_t n_capped = 0;
  // Path i draws from Philox counters (step, i, stream) under the key config.seed,
  // so (seed, i) is its seed record and the path does not depend on the batch.
};

struct OccupationEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

PathEnsemble simulate_paths(const SimConfig& config);
// Same output, single-threaded reference kernel.
PathEnsemble simulate_paths_serial(const SimConfig& config);
// Positions of path i alone (x_0 up to the last point before exit).
std::vector<Vec2> replay_path(const SimConfig& config, std::size_t i);

// Mean and standard error with compensated summation in index order.
OccupationEstimate summarize(const std::vector<double>& samples);

OccupationEstimate exit_time_estimate(const PathEnsemble& ensemble);
// Functional registered in the config under `name`.
OccupationEstimate occupation_functional(const PathEnsemble& ensemble, std::string_view name);
// Replays every path from its counters and accumulates the left-endpoint sum of f.
OccupationEstimate occupation_functional(const PathEnsemble& ensemble, const ScalarFn& f);
OccupationEstimate discounted_occupation(const PathEnsemble& ensemble, const ScalarFn& f, double K);

struct QuadratureSpec {
  double h = 1.0 / 256;
  double k = 1.0 / 256;  // cylinders only
};

// lhs = (int_domain f^gamma)^{1/gamma} by the midpoint rule, rhs = E int_0^tau f.
// For cylinders f must vanish on the lower half (t <= t0 + height/2).
BoundReport check_occupation_bound(const ScalarFn& f, const OccupationEstimate& rhs, double gamma,
                                   const Domain& domain, const QuadratureSpec& quad = {});
BoundReport check_occupation_bound(const ScalarFn& f, const PathEnsemble& ensemble, double gamma,
                                   const Domain& domain, const QuadratureSpec& quad = {});

std::string to_json(const OccupationEstimate& e);
// One row per path: path,exit_time,steps,capped[,functional...]
void write_paths_csv(std::ostream& out, const PathEnsemble& ensemble);

}  // namespace lpest
