#pragma once

#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "lpest/domain.hpp"
#include "lpest/fd_solve.hpp"
#include "lpest/operator.hpp"

namespace lpest {

enum class Branch { kElliptic, kParabolic };

// b = b1 + b2 with b1 the radial truncation of b at level mu_cut.
std::pair<Vec2, Vec2> split_drift(Vec2 b, double mu_cut);
std::pair<VectorFn, VectorFn> split_drift(const VectorFn& b, double mu_cut);

// |b| sampled with quadrature weights over a truncated domain. `exterior` is
// the magnitude of |b| outside it (0 for compactly supported b): (|b| - mu)_+
// has infinite L_q norm whenever mu < exterior.
struct DriftSamples {
  int dim = 1;
  std::vector<double> magnitude;
  std::vector<double> weight;
  double exterior = 0.0;
};

// Samples |b| at every valued node of the grid with the region weights of the grid domain.
DriftSamples sample_drift(const VectorFn& b, const Grid& grid, double exterior = 0.0);

// ||(|b| - mu)_+||_{L_q}; +inf when mu < exterior.
double excess_norm(const DriftSamples& b, double mu, double q);

// Smallest mu >= 0 with ||(|b| - mu)_+||_{L_q} <= theta lambda^{-1/(2d+2)}
// (parabolic) or <= theta (elliptic; lambda is ignored).
double mu_theta(const DriftSamples& b, double theta, double lambda, double q, Branch branch);

// ||b2||_{L_{d+2}}^{d+2} theta^{-(d+1)}; d is the spatial dimension.
double nu_theta(const DriftSamples& b2, double theta);

// Root lambda of K lambda + mu_theta(lambda) sqrt(lambda) = mu.
double lambda_of_mu(double K, const std::function<double(double)>& mu_theta_fn, double mu);

struct BankMember {
  std::string name;
  ScalarFn f;  // nonnegative
};

// At least 16 nonnegative functions around the domain center: Gaussian bumps of
// widths `width` * {1, 2, 4, 8}, shifted bumps, ball indicators, oscillatory
// envelopes, two domain-scale bumps and the constant.
std::vector<BankMember> make_test_bank(const Domain& domain, double width);

struct NormEstimate {
  double value = 0.0;  // max over the bank of ||u_+||_p / ||f||_p, a lower bound on ||R_mu||
  std::size_t argmax = 0;
  std::vector<double> norm_u;
  std::vector<double> norm_f;
  std::vector<double> ratio;
  // A bank solution had a negative part (should not happen for monotone schemes).
  bool negative_part = false;
  bool monotone = true;
};

// OpenMP over bank members; identical to the serial reference.
NormEstimate estimate_operator_norm(const OperatorSpec& spec, double mu, double p,
                                    std::shared_ptr<const Grid> grid, const std::vector<BankMember>& bank,
                                    const SolverOptions& options = {});
NormEstimate estimate_operator_norm_serial(const OperatorSpec& spec, double mu, double p,
                                           std::shared_ptr<const Grid> grid,
                                           const std::vector<BankMember>& bank,
                                           const SolverOptions& options = {});

// Truncated line/box and bank width for the sign-drift family at one mu:
// bump width 0.02 min(1/nu, 1/M) and h = width/3, radius 5/nu. Each
// refinement level halves width and h.
struct ResolventDiscretization {
  double radius = 0.0;
  double h = 0.0;
  double width = 0.0;
};
ResolventDiscretization suggest_discretization(double mu, double M, int refine = 0);

struct DichotomyRow {
  double mu = 0.0;
  double norm_u = 0.0;  // at the maximizing bank member
  double norm_f = 0.0;
  double ratio = 0.0;   // N_hat
  double mu_ratio = 0.0;
  double mu2_ratio = 0.0;
  std::string member;
  double refined_ratio = 0.0;  // N_hat after one refinement, 0 when not run
};

struct DichotomyReport {
  double K = 0.0;
  double M = 0.0;
  double p = 1.0;
  double threshold = 0.0;  // (K + 1) M^2
  std::vector<DichotomyRow> rows;
  // max mu N_hat over mu >= threshold and max mu^2 N_hat over mu <= threshold
  double sup_mu_ratio_above = 0.0;
  double sup_mu2_ratio_below = 0.0;
  // Intersection of the two asymptotes c1/mu and c2/mu^2 from the end rows.
  double crossover = 0.0;
  double max_refinement_change = 0.0;
  bool negative_part = false;
};

// Builds the grid for (mu, refine) and returns (grid, bank width).
using DiscretizationFn =
    std::function<std::pair<std::shared_ptr<const Grid>, double>(double mu, int refine)>;

DichotomyReport check_dichotomy(const OperatorSpec& spec, double M, double p,
                                const std::vector<double>& mu_list, const DiscretizationFn& discretize,
                                bool refine = true);

// The sign-drift operator with the grid policy of suggest_discretization.
DichotomyReport check_dichotomy_56(double M, const std::vector<double>& mu_list, bool refine = true);

void write_csv(std::ostream& out, const DichotomyReport& report);
std::string to_json(const DichotomyReport& report);

}  // namespace lpest
