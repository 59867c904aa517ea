#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lpest/domain.hpp"
#include "lpest/fd_solve.hpp"
#include "lpest/operator.hpp"
#include "lpest/sde.hpp"

namespace lpest {

// inf over a in [delta, 1/delta], |b| <= K of a u_xx + b u_x + f (d = 1).
double bellman_rhs_1d(double u_xx, double u_x, double delta, double K, double f);

struct BellmanProblem {
  double delta = 0.5;
  double K = 0.0;
  ScalarFn f;  // nonnegative forcing
  GridSpec grid{1, 1, 1.0 / 64, 1.0 / 64};
};

struct BellmanOptions {
  double tolerance = 1e-10;  // max-norm change between policy sweeps
  int max_sweeps = 100;
};

struct BellmanSolution {
  GridFunction u;
  int max_sweeps = 0;  // worst per-step policy-iteration count
  int total_sweeps = 0;
  int steps = 0;
};

// Solves u_t + inf_{a, b}[a u_xx + b u_x] + f = 0 in a 1-D cylinder with zero
// data on the parabolic boundary. Implicit Euler in time, policy iteration per
// step; the drift uses one-sided differences upwinded for the optimal b.
BellmanSolution solve_bellman_1d(const BellmanProblem& problem, const Domain& domain,
                                 const BellmanOptions& options = {});

struct SuboptimalityReport {
  bool holds = true;
  double margin = 0.0;     // min over nodes of u_linear - u_bellman
  double tolerance = 0.0;  // 10 h^2
  double worst_t = 0.0;
  double worst_x = 0.0;
  double u_bellman_origin = 0.0;
  double u_linear_origin = 0.0;
  std::optional<OccupationEstimate> mc;  // occupation of f along the spec diffusion
  bool mc_holds = true;
};

// u_bellman <= u_linear nodewise, where u_linear solves the linear problem for
// `spec` (an operator with a in [delta, 1/delta], |b| <= K, c = 0) with the
// same f, grid and data, using the upwind drift scheme.
SuboptimalityReport check_suboptimality(const BellmanSolution& bellman, const OperatorSpec& spec,
                                        const ScalarFn& f);

// Adds the Monte Carlo side: E int_0^tau f(t, x_t) dt >= u_bellman(t0, center) - 3 stderr.
SuboptimalityReport check_suboptimality(const BellmanSolution& bellman, const OperatorSpec& spec,
                                        const ScalarFn& f, double dt, std::size_t n_paths,
                                        std::uint64_t seed);

// Randomized d = 1 operators with a in [delta, 1/delta], |b| <= K, c = 0 and
// smooth (t, x) dependence; deterministic in seed.
std::vector<OperatorSpec> random_admissible_specs(double delta, double K, int count, std::uint64_t seed);

std::string to_json(const SuboptimalityReport& report);

}  // namespace lpest
