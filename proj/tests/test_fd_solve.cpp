#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "lpest/fd_solve.hpp"

using namespace lpest;

namespace {

const ScalarFn kZero = [](double, Vec2) { return 0.0; };
const ScalarFn kMinusOne = [](double, Vec2) { return -1.0; };

double center_value(const GridFunction& u, int level = 0) {
  const Grid& g = u.grid();
  return u.at(level, g.index(g.nx() / 2, g.ny() / 2));
}

double max_abs(const GridFunction& u) {
  double m = 0.0;
  for (double v : u.values()) m = std::max(m, std::abs(v));
  return m;
}

// Independent oracle: (1 - eps) v'' + v'/rho = -1_{[0, r]} with v'(0) = 0, v(3/2) = 0,
// integrated by composite Simpson on v' from the integrating factor.
double radial_oracle(double eps, double r, double at) {
  auto vprime = [&](double rho) {
    if (rho <= r) return -rho / (2.0 - eps);
    return -std::pow(r, (2.0 - eps) / (1.0 - eps)) * std::pow(rho, -1.0 / (1.0 - eps)) / (2.0 - eps);
  };
  auto simpson = [&](double a, double b) {
    const int n = 20000;
    const double hh = (b - a) / n;
    double s = vprime(a) + vprime(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * vprime(a + i * hh);
    return s * hh / 3.0;
  };
  // v(at) = -int_at^{3/2} v'
  if (at >= r) return -simpson(at, 1.5);
  return -simpson(at, r) - simpson(r, 1.5);
}

}  // namespace

TEST_CASE("elliptic solve: Laplacian on the unit disk and interval") {
  OperatorSpec lap2{families::laplacian(2), 1.0, 0.0};
  const auto g2 = classify_boundary(Domain::ball(2, 1.0), {2, 2, 1.0 / 32, 0.0});
  // Quadratic solution: exact when the boundary data is the exact solution.
  const ScalarFn exact = [](double, Vec2 x) { return 0.25 * (1.0 - x.x * x.x - x.y * x.y); };
  const auto s_exact = solve_elliptic(lap2, g2, kMinusOne, exact);
  CHECK(center_value(s_exact.u) == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(s_exact.report.monotone_scheme);
  // Zero data on the snapped boundary: u(0) -> 1/4 as h -> 0.
  const auto s0 = solve_elliptic(lap2, g2, kMinusOne, kZero);
  CHECK(std::abs(center_value(s0.u) - 0.25) < 0.01);

  OperatorSpec lap1{families::laplacian(1), 1.0, 0.0};
  const auto g1 = classify_boundary(Domain::ball(1, 1.0), {1, 1, 1.0 / 8, 0.0});
  const auto s1 = solve_elliptic(lap1, g1, kMinusOne, kZero);
  CHECK(center_value(s1.u) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s1.report.residual_norm < 1e-12);
}

TEST_CASE("elliptic solve: degenerate radial example converges to the exit value") {
  const double eps = 0.5, r = 0.25;
  const Vec2 c{0.5, 0.0};
  OperatorSpec spec{families::radial_degenerate(eps, c), 1.0 - eps, 0.0};
  const auto g = classify_boundary(Domain::ball(2, 1.5, c), {2, 2, 1.0 / 32, 0.0});
  const ScalarFn rhs = [&](double, Vec2 x) { return norm(x - c) < r ? -1.0 : 0.0; };
  const auto s = solve_elliptic(spec, g, rhs, kZero);
  const double oracle = radial_oracle(eps, r, 0.5);
  CHECK(oracle == doctest::Approx(1.0 / 72.0).epsilon(1e-9));
  // The origin sits on the grid: box starts at -1.
  const double u0 = s.u.nearest(0.0, {0.0, 0.0});
  CHECK(std::abs(u0 / oracle - 1.0) < 0.1);
  CHECK(s.report.monotone_scheme);
}

TEST_CASE("parabolic solve: linear-in-time solution is reproduced exactly") {
  const double rho = 1.0;
  OperatorSpec lap{families::laplacian(2), 1.0, 0.0};
  const auto g = classify_boundary(Domain::cylinder(2, rho, 1.0), {2, 2, 1.0 / 16, 1.0 / 16});
  const ScalarFn data = [&](double t, Vec2) { return rho - t; };
  const auto s = solve_parabolic(lap, g, kMinusOne, data);
  double err = 0.0;
  for (int l = 0; l < g->levels(); ++l)
    for (int q = 0; q < g->space_size(); ++q)
      if (g->has_value(l, q)) err = std::max(err, std::abs(s.u.at(l, q) - (rho - g->time(l))));
  CHECK(err < 1e-11);

  const auto z = solve_parabolic(lap, g, kZero, kZero);
  CHECK(max_abs(z.u) == 0.0);
}

TEST_CASE("parabolic solve: manufactured solutions") {
  const double rho = 1.0;
  OperatorSpec spec{families::laplacian(1), 0.5, 0.0};
  const double a = 1.3;
  spec.coeffs.a = [a](double, Vec2) { return SymMat2{a, 0.0, 0.0}; };
  // u* = (rho - t)(1 - x^2) is reproduced up to round-off.
  const ScalarFn ustar = [&](double t, Vec2 x) { return (rho - t) * (1.0 - x.x * x.x); };
  const ScalarFn rhs = [&](double t, Vec2 x) { return -(1.0 - x.x * x.x) - 2.0 * a * (rho - t); };
  const auto g = classify_boundary(Domain::cylinder(1, rho, 1.0), {1, 1, 1.0 / 16, 1.0 / 32});
  const auto s = solve_parabolic(spec, g, rhs, ustar);
  double err = 0.0;
  for (int l = 0; l < g->levels(); ++l)
    for (int q = 0; q < g->space_size(); ++q)
      if (g->has_value(l, q)) err = std::max(err, std::abs(s.u.at(l, q) - ustar(g->time(l), g->coord(q))));
  CHECK(err < 1e-10);

  // Non-polynomial solution: error O(h^2 + k) under halving (k ~ h^2).
  const ScalarFn w = [](double t, Vec2 x) { return std::exp(t) * std::cos(0.5 * std::numbers::pi * x.x); };
  const ScalarFn wrhs = [&](double t, Vec2 x) {
    return (1.0 - a * 0.25 * std::numbers::pi * std::numbers::pi) * w(t, x);
  };
  double prev = 0.0;
  for (int lev = 0; lev < 3; ++lev) {
    const double h = 0.125 / (1 << lev);
    const auto gl = classify_boundary(Domain::cylinder(1, rho, 1.0), {1, 1, h, h * h * 4});
    const auto sl = solve_parabolic(spec, gl, wrhs, w);
    double e = 0.0;
    for (int l = 0; l < gl->levels(); ++l)
      for (int q = 0; q < gl->space_size(); ++q)
        if (gl->has_value(l, q)) e = std::max(e, std::abs(sl.u.at(l, q) - w(gl->time(l), gl->coord(q))));
    if (lev > 0) CHECK(prev / e > 3.5);
    prev = e;
  }
}

TEST_CASE("elliptic solve: second-order convergence on a smooth manufactured solution") {
  OperatorSpec spec{families::laplacian(2), 0.5, 2.0};
  spec.coeffs.a = [](double, Vec2 x) { return SymMat2{1.2 + 0.3 * x.x, 0.2 * x.y, 1.0}; };
  spec.coeffs.b = [](double, Vec2 x) { return Vec2{0.5, -0.3 * x.x}; };
  spec.coeffs.c = [](double, Vec2 x) { return 1.0 + x.x * x.x; };
  const ScalarFn u = [](double, Vec2 x) { return std::sin(x.x) * std::exp(x.y); };
  const ScalarFn rhs = [&](double t, Vec2 x) {
    const SymMat2 a = spec.coeffs.a(t, x);
    const Vec2 b = spec.coeffs.b(t, x);
    const double s = std::sin(x.x), cs = std::cos(x.x), e = std::exp(x.y);
    return a.xx * (-s * e) + 2.0 * a.xy * (cs * e) + a.yy * (s * e) + b.x * cs * e + b.y * s * e -
           spec.coeffs.c(t, x) * s * e;
  };
  double prev = 0.0;
  for (int lev = 0; lev < 3; ++lev) {
    const double h = 0.1 / (1 << lev);
    const auto g = classify_boundary(Domain::ball(2, 1.0), {2, 2, h, 0.0});
    const auto s = solve_elliptic(spec, g, rhs, u);
    double e = 0.0;
    for (int q = 0; q < g->space_size(); ++q)
      if (g->has_value(0, q)) e = std::max(e, std::abs(s.u.at(0, q) - u(0.0, g->coord(q))));
    if (lev > 0) CHECK(std::log2(prev / e) > 1.8);
    prev = e;
  }
}

TEST_CASE("resolvent: closed form on a line and the sign-drift L1 norm") {
  OperatorSpec lap{families::laplacian(1), 1.0, 0.0};
  const double mu = 2.0, R = 3.0;
  const auto g = classify_boundary(Domain::ball(1, R), {1, 1, 1.0 / 256, 0.0});
  const ScalarFn one = [](double, Vec2) { return 1.0; };
  const auto s = apply_resolvent(lap, mu, one, g);
  double err = 0.0;
  for (int q = 0; q < g->space_size(); ++q) {
    const double x = g->coord(q).x;
    const double ex = (1.0 - std::cosh(std::sqrt(mu) * x) / std::cosh(std::sqrt(mu) * R)) / mu;
    err = std::max(err, std::abs(s.u.at(0, q) - ex));
  }
  CHECK(err < 1e-5);
  CHECK(max_abs(apply_resolvent(lap, mu, kZero, g).u) == 0.0);
  CHECK_THROWS_AS(apply_resolvent(lap, 0.0, one, g), ValidationError);

  // Sign drift, M = 3, mu = 4: the fundamental solution has L1 norm 1.
  OperatorSpec sd{families::sign_drift(3.0), 1.0, 3.0};
  const double w = 0.02;
  const auto gs = classify_boundary(Domain::ball(1, 16.0), {1, 1, w / 16, 0.0});
  const ScalarFn bump = [w](double, Vec2 x) {
    const double z = x.x / w;
    return std::abs(z) < 1.0 ? 15.0 / 16.0 * (1 - z * z) * (1 - z * z) / w : 0.0;
  };
  const auto ss = apply_resolvent(sd, 4.0, bump, gs);
  double l1 = 0.0;
  for (int q = 0; q < gs->space_size(); ++q) l1 += std::abs(ss.u.at(0, q)) * gs->space_weights()[q];
  CHECK(l1 == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("maximum principle, positivity, sup bound and linearity") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  OperatorSpec spec{families::checkerboard(2, 0.3), 0.3, 1.0};
  spec.coeffs.b = [](double, Vec2 x) { return Vec2{0.5 * x.y, -0.4}; };
  const auto g = classify_boundary(Domain::ball(2, 1.0), {2, 2, 1.0 / 24, 0.0});
  for (int trial = 0; trial < 5; ++trial) {
    const double a1 = U(rng), a2 = U(rng), a3 = U(rng);
    const ScalarFn f = [=](double, Vec2 x) { return -std::abs(a1 + a2 * x.x + a3 * x.y * x.x); };
    const ScalarFn data = [=](double, Vec2 x) { return std::abs(a2 * x.y) + 0.1 * std::abs(a3); };
    const auto s = solve_elliptic(spec, g, f, data);
    REQUIRE(s.report.monotone_scheme);
    for (double v : s.u.values()) CHECK(v >= -1e-13);

    const ScalarFn fp = [=](double, Vec2 x) { return std::abs(a1 + a2 * x.x - a3 * x.y); };
    const double mu = 0.5 + 2.0 * std::abs(a1);
    const auto r = apply_resolvent(spec, mu, fp, g);
    double fmax = 0.0;
    for (int q = 0; q < g->space_size(); ++q)
      if (g->has_value(0, q)) fmax = std::max(fmax, fp(0.0, g->coord(q)));
    for (double v : r.u.values()) {
      CHECK(v >= -1e-13);
      CHECK(v <= fmax / mu + 1e-12);
    }
  }
  const ScalarFn f1 = [](double, Vec2 x) { return x.x * x.y; };
  const ScalarFn f2 = [](double, Vec2 x) { return std::cos(3.0 * x.x); };
  const ScalarFn f12 = [&](double t, Vec2 x) { return 2.0 * f1(t, x) - 0.7 * f2(t, x); };
  const auto u1 = solve_elliptic(spec, g, f1, kZero).u;
  const auto u2 = solve_elliptic(spec, g, f2, kZero).u;
  const auto u12 = solve_elliptic(spec, g, f12, kZero).u;
  double err = 0.0;
  for (std::size_t i = 0; i < u12.values().size(); ++i)
    err = std::max(err, std::abs(u12.values()[i] - 2.0 * u1.values()[i] + 0.7 * u2.values()[i]));
  CHECK(err < 1e-10);
}

TEST_CASE("monotone flag drops for strong cross terms") {
  OperatorSpec spec{families::laplacian(2), 0.2, 0.0};
  spec.coeffs.a = [](double, Vec2) { return SymMat2{1.0, 0.9, 1.0}; };
  spec.coeffs.a = [](double, Vec2) { return SymMat2{1.0, 1.5, 3.0}; };
  const auto g = classify_boundary(Domain::ball(2, 1.0), {2, 2, 0.1, 0.0});
  const auto s = solve_elliptic(spec, g, kMinusOne, kZero);
  CHECK_FALSE(s.report.monotone_scheme);
}

TEST_CASE("non-elliptic operators are rejected") {
  OperatorSpec spec{families::laplacian(1), 1.0, 0.0};
  spec.coeffs.a = [](double, Vec2 x) { return SymMat2{x.x > 0.5 ? 0.0 : 1.0, 0.0, 0.0}; };
  const auto g = classify_boundary(Domain::ball(1, 1.0), {1, 1, 0.1, 0.0});
  CHECK_THROWS_AS(solve_elliptic(spec, g, kMinusOne, kZero), ValidationError);
  OperatorSpec neg{families::laplacian(1), 1.0, 0.0};
  neg.coeffs.c = [](double, Vec2) { return -1.0; };
  CHECK_THROWS_AS(solve_elliptic(neg, g, kMinusOne, kZero), ValidationError);
  const auto gc = classify_boundary(Domain::cylinder(1, 1.0, 1.0), {1, 1, 0.1, 0.1});
  CHECK_THROWS_AS(solve_elliptic(neg, gc, kMinusOne, kZero), ValidationError);
  CHECK_THROWS_AS(solve_parabolic(neg, g, kMinusOne, kZero), ValidationError);
}

TEST_CASE("discrete derivatives are exact on low-degree polynomials") {
  const auto g = classify_boundary(Domain::ball(2, 1.0), {2, 2, 0.1, 0.0});
  const auto check = [&](const ScalarFn& fn, Vec2 grad_of_origin_shift, auto&& expect) {
    (void)grad_of_origin_shift;
    const auto u = GridFunction::sample(g, fn);
    const auto d = discrete_derivatives(u);
    int used = 0;
    for (int q = 0; q < g->space_size(); ++q) {
      const std::size_t f = g->flat(0, q);
      if (!d.available[f]) continue;
      ++used;
      expect(g->coord(q), d.grad[f], d.hess[f]);
    }
    CHECK(used > 0);
  };
  check([](double, Vec2 x) { return x.x; }, {}, [](Vec2, Vec2 gr, SymMat2 H) {
    CHECK(gr.x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(gr.y) < 1e-12);
    CHECK(std::abs(H.xx) < 1e-9);
    CHECK(std::abs(H.xy) < 1e-9);
    CHECK(std::abs(H.yy) < 1e-9);
  });
  check([](double, Vec2 x) { return x.x * x.x; }, {}, [](Vec2 x, Vec2 gr, SymMat2 H) {
    CHECK(gr.x == doctest::Approx(2.0 * x.x).epsilon(1e-9).scale(1.0));
    CHECK(H.xx == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::abs(H.xy) < 1e-9);
  });
  check([](double, Vec2 x) { return x.x * x.y; }, {}, [](Vec2, Vec2, SymMat2 H) {
    CHECK(H.xy == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(H.xx) < 1e-9);
    CHECK(std::abs(H.yy) < 1e-9);
  });
  // Smallest admissible grid: three nodes per axis.
  const auto tiny = classify_boundary(Domain::ball(1, 1.0), {1, 1, 1.0, 0.0});
  REQUIRE(tiny->nx() == 3);
  const auto dq = discrete_derivatives(GridFunction::sample(tiny, [](double, Vec2 x) { return x.x * x.x; }));
  CHECK(dq.hess[1].xx == doctest::Approx(2.0));
  CHECK_THROWS_AS(classify_boundary(Domain::ball(1, 1.0), {1, 1, 2.5, 0.0}), ValidationError);
}

TEST_CASE("serialization") {
  const auto g = classify_boundary(Domain::ball(1, 1.0), {1, 1, 0.5, 0.0});
  const auto u = GridFunction::sample(g, [](double, Vec2 x) { return x.x; });
  std::ostringstream out;
  write_csv(out, u);
  CHECK(out.str().rfind("t,x,value\n", 0) == 0);
  CHECK(out.str().find("0,-1,-1\n") != std::string::npos);
  CHECK(to_json(SolveReport{1e-14, 3, true}).find("\"iterations\":3") != std::string::npos);
}
