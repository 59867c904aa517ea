#include <cmath>
#include <random>

#include "doctest.h"
#include "lpest/bellman.hpp"

using namespace lpest;

namespace {

const Domain kCyl = Domain::cylinder(1, 2.0, 1.0);

BellmanProblem problem(double delta, double K, ScalarFn f, double h = 1.0 / 32) {
  BellmanProblem p;
  p.delta = delta;
  p.K = K;
  p.f = std::move(f);
  p.grid = {1, 1, h, h};
  return p;
}

OperatorSpec linear(MatrixFn a, VectorFn b, double delta, double K) {
  CoefficientField c;
  c.dim = 1;
  c.a = std::move(a);
  c.b = std::move(b);
  c.c = [](double, Vec2) { return 0.0; };
  c.time_dependent = true;
  return {c, delta, K};
}

const ScalarFn kOne = [](double, Vec2) { return 1.0; };

}  // namespace

TEST_CASE("closed-form Bellman infimum") {
  CHECK(bellman_rhs_1d(2.0, 0.0, 0.5, 0.0, 0.0) == 1.0);
  CHECK(bellman_rhs_1d(-2.0, 0.0, 0.5, 0.0, 0.0) == -4.0);
  CHECK(bellman_rhs_1d(0.0, 3.0, 0.5, 2.0, 5.0) == -1.0);
  // Brute force over the control set.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double uxx = U(rng), ux = U(rng), delta = 0.3, K = 1.7, f = std::abs(U(rng));
    double best = INFINITY;
    for (int i = 0; i <= 200; ++i)
      for (int j = 0; j <= 200; ++j) {
        const double a = delta + (1.0 / delta - delta) * i / 200.0, b = -K + 2.0 * K * j / 200.0;
        best = std::min(best, a * uxx + b * ux + f);
      }
    CHECK(bellman_rhs_1d(uxx, ux, delta, K, f) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("zero forcing gives zero") {
  const auto sol = solve_bellman_1d(problem(0.5, 1.0, [](double, Vec2) { return 0.0; }), kCyl);
  for (double v : sol.u.values()) CHECK(v == 0.0);
}

TEST_CASE("nonnegative forcing gives a nonnegative solution") {
  const ScalarFn f = [](double t, Vec2 x) { return (1.0 + std::sin(7 * x.x)) * (t > 1.0 ? 1.0 : 0.3); };
  const auto sol = solve_bellman_1d(problem(0.25, 2.0, f), kCyl);
  double mx = 0.0;
  for (double v : sol.u.values()) {
    CHECK(v >= 0.0);
    mx = std::max(mx, v);
  }
  CHECK(mx > 0.0);
  CHECK(sol.max_sweeps <= 5);
}

TEST_CASE("degenerate control set reproduces the linear solver") {
  const auto sol = solve_bellman_1d(problem(1.0, 0.0, kOne), kCyl);
  const OperatorSpec heat{families::laplacian(1), 1.0, 0.0};
  const Solution lin = solve_parabolic(heat, sol.u.grid_ptr(), [](double, Vec2) { return -1.0; },
                                       [](double, Vec2) { return 0.0; });
  double diff = 0.0;
  for (std::size_t i = 0; i < sol.u.values().size(); ++i)
    diff = std::max(diff, std::abs(sol.u.values()[i] - lin.u.values()[i]));
  CHECK(diff < 1e-8);
}

TEST_CASE("Bellman solution minorizes linear solutions") {
  const ScalarFn f = [](double t, Vec2 x) { return t > 1.0 ? 1.0 + x.x * x.x : 0.0; };
  const double delta = 0.5, K = 1.5;
  const auto sol = solve_bellman_1d(problem(delta, K, f), kCyl);
  const auto heat = check_suboptimality(
      sol, linear([](double, Vec2) { return SymMat2{1.0, 0, 0}; }, [](double, Vec2) { return Vec2{}; }, delta, K), f);
  CHECK(heat.holds);
  CHECK(heat.margin >= 0.0);
  CHECK(heat.u_linear_origin > heat.u_bellman_origin);

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a0 = delta + (1 / delta - delta) * U(rng), a1 = U(rng), w = 1 + 6 * U(rng), ph = 6 * U(rng);
    const double b0 = K * (2 * U(rng) - 1), b1 = U(rng);
    const MatrixFn a = [=](double t, Vec2 x) {
      const double s = 0.5 + 0.5 * std::sin(w * x.x + ph + t);
      return SymMat2{a0 + (1 / delta - a0) * a1 * s, 0, 0};
    };
    const VectorFn b = [=](double t, Vec2 x) {
      return Vec2{std::clamp(b0 + b1 * std::cos(w * x.x - t), -K, K), 0.0};
    };
    const auto r = check_suboptimality(sol, linear(a, b, delta, K), f);
    CHECK(r.holds);
    CHECK(r.margin >= -r.tolerance);
  }
}

TEST_CASE("near equality for the minimal diffusion on convex parts") {
  // -f with u = (1 - x^2)(2 - t): u_xx < 0 everywhere, so the optimal a is 1/delta.
  const double delta = 0.5;
  const auto sol = solve_bellman_1d(problem(delta, 0.0, kOne), kCyl);
  const auto r = check_suboptimality(
      sol, linear([=](double, Vec2) { return SymMat2{1 / delta, 0, 0}; }, [](double, Vec2) { return Vec2{}; },
                  delta, 0.0),
      kOne);
  CHECK(r.holds);
  CHECK(std::abs(r.margin) < 1e-8);
  CHECK(std::abs(r.u_linear_origin - r.u_bellman_origin) < 1e-8);
}

TEST_CASE("monotone in the forcing") {
  const ScalarFn f1 = [](double, Vec2 x) { return std::max(0.0, 0.5 - x.x); };
  const ScalarFn f2 = [](double, Vec2 x) { return 1.0 + std::max(0.0, 0.5 - x.x); };
  const auto u1 = solve_bellman_1d(problem(0.3, 1.0, f1), kCyl);
  const auto u2 = solve_bellman_1d(problem(0.3, 1.0, f2), kCyl);
  for (std::size_t i = 0; i < u1.u.values().size(); ++i) CHECK(u1.u.values()[i] <= u2.u.values()[i]);
}

TEST_CASE("Monte Carlo counterpart") {
  const ScalarFn f = [](double t, Vec2 x) { return t > 1.0 && std::abs(x.x) < 0.5 ? 1.0 : 0.0; };
  const auto sol = solve_bellman_1d(problem(0.5, 1.0, f), kCyl);
  const auto spec = linear([](double, Vec2) { return SymMat2{1.0, 0, 0}; }, [](double, Vec2) { return Vec2{}; },
                           0.5, 1.0);
  const auto r = check_suboptimality(sol, spec, f, 1e-3, 4000, 8);
  REQUIRE(r.mc.has_value());
  CHECK(r.mc_holds);
  CHECK(r.mc->mean > 0.0);
}

TEST_CASE("invalid Bellman inputs") {
  CHECK_THROWS_AS(solve_bellman_1d(problem(0.5, 1.0, kOne), Domain::ball(1, 1.0)), ValidationError);
  CHECK_THROWS_AS(solve_bellman_1d(problem(1.5, 1.0, kOne), kCyl), ValidationError);
  CHECK_THROWS_AS(solve_bellman_1d(problem(0.5, -1.0, kOne), kCyl), ValidationError);
  CHECK_THROWS_AS(solve_bellman_1d(problem(0.5, 1.0, [](double, Vec2) { return -1.0; }), kCyl), ValidationError);
  const auto sol = solve_bellman_1d(problem(0.5, 1.0, kOne), kCyl);
  const auto outside = linear([](double, Vec2) { return SymMat2{3.0, 0, 0}; }, [](double, Vec2) { return Vec2{}; },
                              0.5, 1.0);
  CHECK_THROWS_AS(check_suboptimality(sol, outside, kOne), ValidationError);
  BellmanOptions tight;
  tight.max_sweeps = 1;
  CHECK_THROWS_AS(solve_bellman_1d(problem(0.5, 1.0, kOne), kCyl, tight), NumericalError);
}
