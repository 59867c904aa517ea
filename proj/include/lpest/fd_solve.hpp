#pragma once

#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lpest/core.hpp"
#include "lpest/domain.hpp"
#include "lpest/operator.hpp"

namespace lpest {

// Scalar field sampled on every time level of a grid. Exterior nodes hold 0.
class GridFunction {
 public:
  explicit GridFunction(std::shared_ptr<const Grid> grid);
  GridFunction(std::shared_ptr<const Grid> grid, std::vector<double> values);

  // Samples fn at every node that carries a value.
  static GridFunction sample(std::shared_ptr<const Grid> grid, const ScalarFn& fn);

  const Grid& grid() const { return *grid_; }
  const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double at(int level, int s) const { return values_[grid_->flat(level, s)]; }
  double& at(int level, int s) { return values_[grid_->flat(level, s)]; }
  // Value at the node closest to (t, x); throws if that node carries no value.
  double nearest(double t, Vec2 x) const;

 private:
  std::shared_ptr<const Grid> grid_;
  std::vector<double> values_;
};

enum class DriftScheme {
  kHybrid,  // centered where it keeps the stencil monotone, upwind elsewhere
  kUpwind,  // always upwind against the sign of b
};

struct SolverOptions {
  DriftScheme drift = DriftScheme::kHybrid;
  // A solve whose max-norm residual exceeds tol * (max|rhs| + max|A| max|u|) is a failure.
  double residual_tolerance = 1e-8;
};

struct SolveReport {
  double residual_norm = 0.0;
  int iterations = 1;
  bool monotone_scheme = true;
};

struct Solution {
  GridFunction u;
  SolveReport report;
};

// Lu = rhs in a ball with u = boundary on boundary nodes. Coefficients are
// evaluated at t = 0.
Solution solve_elliptic(const OperatorSpec& spec, std::shared_ptr<const Grid> grid,
                        const ScalarFn& rhs, const ScalarFn& boundary,
                        const SolverOptions& options = {});

// Lu = rhs in a cylinder, u = boundary on the parabolic boundary. Backward
// (implicit) Euler marching from the terminal slab down to t0.
Solution solve_parabolic(const OperatorSpec& spec, std::shared_ptr<const Grid> grid,
                         const ScalarFn& rhs, const ScalarFn& boundary,
                         const SolverOptions& options = {});

// (mu - L) u = f with zero data on the (parabolic) boundary.
Solution apply_resolvent(const OperatorSpec& spec, double mu, const ScalarFn& f,
                         std::shared_ptr<const Grid> grid, const SolverOptions& options = {});

// Spatial derivatives at every valued node of every level. Centered where both
// neighbours carry values, one-sided three-point otherwise; `available` is 0
// where neither fits. D12 is the centered difference of centered differences.
struct Derivatives {
  std::vector<Vec2> grad;
  std::vector<SymMat2> hess;
  std::vector<double> dt;  // time derivative, cylinders only (zero for balls)
  std::vector<unsigned char> available;
};

Derivatives discrete_derivatives(const GridFunction& u);

// Lu evaluated from discrete derivatives, including d_t on cylinders.
// Entries where derivatives are unavailable are 0 and flagged in `available`.
struct OperatorApplication {
  std::vector<double> values;
  std::vector<unsigned char> available;
};
OperatorApplication apply_operator(const OperatorSpec& spec, const GridFunction& u,
                                   const Derivatives& d);

// CSV with columns t,x[,y],value over nodes that carry a value.
void write_csv(std::ostream& out, const GridFunction& u);
std::string to_json(const SolveReport& report);

}  // namespace lpest
