#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lpest/domain.hpp"
#include "lpest/fd_solve.hpp"
#include "lpest/operator.hpp"

namespace lpest {

// Result of checking one inequality instance lhs <= N * sum(rhs_terms).
struct BoundReport {
  double lhs = 0.0;
  std::vector<std::pair<std::string, double>> rhs_terms;
  double ratio = 0.0;  // lhs / sum(rhs); equals fitted_N
  double gamma_used = 1.0;
  double fitted_N = 0.0;
  // Monte Carlo checks only.
  double fitted_N_stderr = 0.0;
  bool inconclusive = false;

  double rhs_sum() const;
};

// Sets ratio and fitted_N from lhs and rhs_terms. 0/0 is 0; x/0 is +inf.
void finalize(BoundReport& report);

struct TailData {
  std::vector<double> lambda;
  std::vector<double> F;
  double u00 = 0.0;
};

struct TailFit {
  double gamma_hat = 0.0;
  double constant = 0.0;  // F ~ constant * lambda^{-gamma_hat}
  int samples = 0;
};

// Quadrature weight of every node of the grid restricted to region (a ball or
// cylinder); zero for nodes without a value. Cells are clipped to both the grid
// domain and the region.
std::vector<double> region_weights(const Grid& grid, const Domain& region);

// (sum_i w_i |v_i|^p)^{1/p} over entries with mask != 0 (empty mask = all).
double lp_norm(std::span<const double> values, std::span<const double> weights, double p,
               std::span<const unsigned char> mask = {});
double lp_norm(const GridFunction& u, double p, const Domain& region);
double lp_norm(const GridFunction& u, double p);

// max |u| over (level, node) pairs; empty set throws.
double sup_on(const GridFunction& u, std::span<const std::pair<int, int>> nodes);
// Nodes of the parabolic boundary (lateral + terminal) or dB_r for balls.
std::vector<std::pair<int, int>> boundary_nodes(const Grid& grid);

// F(lambda) = measure of {value >= lambda}, weighted by `weights`.
TailData distribution_function(std::span<const double> values, std::span<const double> weights,
                               std::span<const double> lambdas,
                               std::span<const unsigned char> mask = {});
TailData distribution_function(const GridFunction& field, std::span<const double> lambdas,
                               const Domain& region);

// Least-squares slope of log F against log lambda (samples with F > 0).
TailFit fit_tail_exponent(const TailData& data);

// int |f|^q from the distribution function by layer-cake summation:
// int_0^inf q s^{q-1} F(s) ds, trapezoid in s^q between samples, F = total_measure
// below the first level, power-law tail beyond the last.
double layer_cake_quasinorm(const TailData& data, double q, double total_measure);

struct CheckOptions {
  // Either supplied in (0, 1], or fitted from the tail of |Lu| on the inner domain.
  std::optional<double> gamma;
  int p_exp = 2;
};

// lhs = int_inner |D^2u|^gamma (Frobenius), rhs = (int_outer |Lu|^p)^{gamma/p}
// and sup_{boundary} |u|^gamma.
BoundReport check_hessian_bound(const GridFunction& u, const OperatorSpec& spec,
                                const Domain& inner, const Domain& outer,
                                const CheckOptions& options);
// As above with |Du| (Euclidean).
BoundReport check_gradient_bound(const GridFunction& u, const OperatorSpec& spec,
                                 const Domain& inner, const Domain& outer,
                                 const CheckOptions& options);

// Gamma fitted from the tail of |field| over the masked nodes, clamped to [0.05, 1].
double default_gamma(std::span<const double> field, std::span<const double> weights,
                     std::span<const unsigned char> mask);

// max |L(-u^2) - (-2u Lu - c u^2) + 2 a^{ij} D_i u D_j u| over interior nodes,
// all derivatives discrete.
double verify_identity_22(const GridFunction& u, const OperatorSpec& spec);

std::string to_json(const BoundReport& report);
std::string to_json(const TailData& data);

}  // namespace lpest
