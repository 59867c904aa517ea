#pragma once

#include "lpest/core.hpp"

namespace lpest::exact {

// Degenerate radial example in d = 2: a(x) = I - eps x x^T / |x|^2, outer
// radius 3/2, source disk of radius r centered e1/2 from the origin.
struct RadialExample {
  double eps = 0.5;
  double r = 0.25;
};

// Sign drift b(x) = -M sign(x) in d = 1.
struct SignDriftExample {
  double M = 3.0;
  double mu = 4.0;
};

SymMat2 degenerate_matrix(Vec2 x, double eps);

// Solution of (1 - eps) v'' + v'/rho = -1_{[0, r]}(rho), v'(0) = 0, v(3/2) = 0,
// evaluated at rho in [0, 3/2].
double radial_profile(double eps, double r, double rho);

// u(0) = (1 - eps) / (eps (2 - eps)) 2^{k} (1 - 3^{-k}) r^{(2 - eps)/(1 - eps)}, k = eps/(1 - eps).
double exit_value_38(double eps, double r);

// gamma = 2 (1 - eps) / (2 - eps).
double gamma_of_eps(double eps);

// The r-exponent of the exit value, (2 - eps)/(1 - eps); equals 2 / gamma.
double radial_exponent(double eps);

// u(0) = C |G|^{1/gamma} with |G| = pi r^2; returns C.
double exit_value_constant(double eps);

// nu = (sqrt(M^2 + 4 mu) - M) / 2, evaluated without cancellation.
double nu_56(double M, double mu);

// e^{-nu |x|} / (2 nu): solves u'' - M sign(x) u' - mu u = -delta_0.
double fundamental_solution_56(double M, double mu, double x);

// 1 / nu^2 = [sqrt(M^2 + 4 mu) + M]^2 / (4 mu^2).
double resolvent_l1_norm_56(double M, double mu);

}  // namespace lpest::exact
