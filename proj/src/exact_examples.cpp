#include "lpest/exact_examples.hpp"

#include <cmath>
#include <numbers>

#include "lpest/operator.hpp"

namespace lpest::exact {

namespace {

constexpr double kOuter = 1.5;
// Below this eps the expm1 forms are replaced by their eps = 0 limits.
constexpr double kSmallEps = 1e-14;

void check_eps_open(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("eps must lie in (0, 1)");
}

// (1 - eps)/eps * (rho^{-k} - (3/2)^{-k}), k = eps/(1 - eps); -> ln(3/(2 rho)) as eps -> 0.
double outer_integral(double eps, double rho) {
  const double L = std::log(kOuter / rho);
  if (eps < kSmallEps) return L;
  const double k = eps / (1.0 - eps);
  return std::exp(-k * std::log(kOuter)) * std::expm1(k * L) / k;
}

void check_mu(double M, double mu) {
  if (!(mu > 0.0)) throw ValidationError("mu must be positive");
  if (!(M >= 0.0)) throw ValidationError("M must be nonnegative");
}

}  // namespace

SymMat2 degenerate_matrix(Vec2 x, double eps) { return families::degenerate_matrix(x, eps); }

double radial_profile(double eps, double r, double rho) {
  check_eps_open(eps);
  if (!(r > 0.0 && r < kOuter)) throw ValidationError("radial_profile: r must lie in (0, 3/2)");
  if (!(rho >= 0.0 && rho <= kOuter)) throw ValidationError("radial_profile: rho must lie in [0, 3/2]");
  // v'(s) = -r^{(2-eps)/(1-eps)} s^{-1/(1-eps)} / (2 - eps) beyond r.
  const double scale = std::pow(r, radial_exponent(eps)) / (2.0 - eps);
  auto beyond = [&](double s) { return scale * outer_integral(eps, s); };
  if (rho >= r) return beyond(rho);
  // v'(s) = -s / (2 - eps) inside the source.
  return beyond(r) + (r * r - rho * rho) / (2.0 * (2.0 - eps));
}

double exit_value_38(double eps, double r) {
  check_eps_open(eps);
  if (!(r > 0.0 && r < 0.5)) throw ValidationError("exit_value_38: r must lie in (0, 1/2)");
  const double k = eps / (1.0 - eps);
  // (1 - 3^{-k}) / eps evaluated as -expm1(-k ln 3) / eps.
  const double ratio = eps < kSmallEps ? std::log(3.0) : -std::expm1(-k * std::log(3.0)) / eps;
  return (1.0 - eps) / (2.0 - eps) * std::pow(2.0, k) * ratio * std::pow(r, radial_exponent(eps));
}

double gamma_of_eps(double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) throw ValidationError("gamma_of_eps: eps must lie in [0, 1)");
  return 2.0 * (1.0 - eps) / (2.0 - eps);
}

double radial_exponent(double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) throw ValidationError("radial_exponent: eps must lie in [0, 1)");
  return (2.0 - eps) / (1.0 - eps);
}

double exit_value_constant(double eps) {
  // u(0) = c r^{2/gamma} and |G|^{1/gamma} = pi^{1/gamma} r^{2/gamma}.
  const double r = 0.25;
  return exit_value_38(eps, r) / std::pow(std::numbers::pi * r * r, 1.0 / gamma_of_eps(eps));
}

double nu_56(double M, double mu) {
  check_mu(M, mu);
  return 2.0 * mu / (std::sqrt(M * M + 4.0 * mu) + M);
}

double fundamental_solution_56(double M, double mu, double x) {
  const double nu = nu_56(M, mu);
  return std::exp(-nu * std::abs(x)) / (2.0 * nu);
}

double resolvent_l1_norm_56(double M, double mu) {
  check_mu(M, mu);
  if (M == 0.0) return 1.0 / mu;
  const double s = std::sqrt(M * M + 4.0 * mu) + M;
  return s * s / (4.0 * mu * mu);
}

}  // namespace lpest::exact
