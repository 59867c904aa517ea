#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lpest/domain.hpp"
#include "lpest/estimates.hpp"
#include "lpest/fd_solve.hpp"
#include "lpest/operator.hpp"
#include "lpest/sde.hpp"

namespace lpest {

// One operator/solution pair of the locked inequality suite: Lu = rhs in
// `outer` with u = boundary on its (parabolic) boundary.
struct SuiteCase {
  std::string name;
  OperatorSpec spec;
  Domain outer = Domain::ball(2, 1.0);
  Domain inner = Domain::ball(2, 0.5);
  ScalarFn rhs;
  ScalarFn boundary;
  // Nonnegative forcing for the occupation check; vanishes on the lower half of cylinders.
  ScalarFn occupation_f;
  double h = 1.0 / 16;  // base step; k = h on cylinders
  // Euler-Maruyama step for the occupation check; the weak error of the scheme
  // grows near jumps of a, so discontinuous cases get a finer step.
  double mc_dt = 1e-3;
};

// Ten fixed cases: smooth, checkerboard-discontinuous and degenerate-radial
// coefficients, elliptic and parabolic, d = 1 and d = 2.
std::vector<SuiteCase> locked_suite();
const SuiteCase& suite_case(const std::string& name);

// Solve on the case grid with step h / 2^level.
GridFunction solve_case(const SuiteCase& c, int level);

struct StabilityRow {
  std::string name;
  double h = 0.0;
  BoundReport coarse;
  BoundReport fine;
  double change = 0.0;  // |N_fine - N_coarse| / N_coarse
};

enum class BoundKind { kHessian, kGradient };

// fitted_N at step h and h/2 with p_exp = d (balls) or d + 1 (cylinders).
// gamma unset uses the tail-fitted default.
StabilityRow hessian_stability(const SuiteCase& c, BoundKind kind, std::optional<double> gamma);

struct OccupationStabilityRow {
  std::string name;
  double gamma = 0.0;
  BoundReport coarse;  // dt
  BoundReport fine;    // dt / 2
  double z = 0.0;      // |N_fine - N_coarse| / combined stderr
};

// Occupation bound along the diffusion of the case operator, started at the
// domain center (cylinder axis at t0), at dt and dt/2 with independent seeds.
// dt <= 0 selects the case step.
OccupationStabilityRow occupation_stability(const SuiteCase& c, double gamma, double dt, std::size_t n_paths,
                                            std::uint64_t seed, int threads = 0);

}  // namespace lpest
