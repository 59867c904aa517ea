#include "lpest/suite.hpp"

#include <cmath>
#include <numbers>

namespace lpest {

namespace {

CoefficientField field(int dim, MatrixFn a, VectorFn b, bool time_dependent, std::string name) {
  CoefficientField f;
  f.dim = dim;
  f.a = std::move(a);
  f.b = std::move(b);
  f.c = [](double, Vec2) { return 0.0; };
  f.time_dependent = time_dependent;
  f.name = std::move(name);
  return f;
}

ScalarFn constant(double v) {
  return [v](double, Vec2) { return v; };
}

VectorFn no_drift() {
  return [](double, Vec2) { return Vec2{}; };
}

// Indicator of the upper half of the cylinder times a spatial disk.
ScalarFn upper_half(const Domain& cyl, double radius) {
  const double tmid = cyl.t0() + 0.5 * cyl.height();
  const Vec2 c = cyl.center();
  return [tmid, c, radius](double t, Vec2 x) { return t > tmid && norm(x - c) < radius ? 1.0 : 0.0; };
}

std::vector<SuiteCase> build() {
  std::vector<SuiteCase> s;
  const Domain b2 = Domain::ball(2, 1.0), b2i = Domain::ball(2, 0.5);
  const Domain b1 = Domain::ball(1, 1.0), b1i = Domain::ball(1, 0.5);
  const Domain c1 = Domain::cylinder(1, 2.0, 1.0), c1i = Domain::cylinder(1, 1.0, 1.0, 1.0);
  const Domain c2 = Domain::cylinder(2, 2.0, 1.0), c2i = Domain::cylinder(2, 1.0, 1.0, 1.0);
  const ScalarFn zero = constant(0.0);
  const ScalarFn disk = [](double, Vec2 x) { return norm(x - Vec2{0.25, 0.1}) < 0.4 ? 1.0 : 0.0; };
  const ScalarFn seg = [](double, Vec2 x) { return std::abs(x.x - 0.2) < 0.4 ? 1.0 : 0.0; };

  {
    SuiteCase c;
    c.name = "smooth-ball-2d";
    c.spec = {field(2,
                    [](double, Vec2 x) {
                      return SymMat2{1.0 + 0.3 * std::sin(2 * x.x), 0.2 * std::cos(x.x * x.y), 1.0 + 0.2 * x.y * x.y};
                    },
                    [](double, Vec2 x) { return Vec2{0.5, 0.3 * x.x}; }, false, "smooth"),
              0.5, 1.0};
    c.outer = b2;
    c.inner = b2i;
    c.rhs = [](double, Vec2 x) { return -1.0 - 0.5 * x.x * x.x; };
    c.boundary = zero;
    c.occupation_f = disk;
    s.push_back(c);
  }
  {
    SuiteCase c;
    c.name = "checkerboard-ball-2d";
    c.spec = {families::checkerboard(2, 0.2, 0.3), 0.2, 0.0};
    c.outer = b2;
    c.inner = b2i;
    c.rhs = constant(-1.0);
    c.boundary = zero;
    c.occupation_f = disk;
    s.push_back(c);
  }
  {
    SuiteCase c;
    c.name = "radial-ball-2d";
    c.spec = {families::radial_degenerate(0.5, {}), 0.5, 0.0};
    c.outer = b2;
    c.inner = b2i;
    c.rhs = [](double, Vec2 x) { return -1.0 - 0.5 * x.x; };
    c.boundary = zero;
    c.occupation_f = disk;
    s.push_back(c);
  }
  {
    SuiteCase c;
    c.name = "harmonic-data-ball-2d";
    c.spec = {families::laplacian(2), 1.0, 0.0};
    c.outer = b2;
    c.inner = b2i;
    c.rhs = [](double, Vec2 x) { return -(1.0 + std::sin(std::numbers::pi * x.x)); };
    c.boundary = [](double, Vec2 x) { return x.x * x.x - x.y * x.y; };
    c.occupation_f = [](double, Vec2 x) { return 1.0 + x.x * x.y > 1.0 ? x.x * x.y : 0.0; };
    s.push_back(c);
  }
  {
    SuiteCase c;
    c.name = "smooth-line";
    c.spec = {field(1, [](double, Vec2 x) { return SymMat2{1.0 + 0.5 * std::sin(3 * x.x), 0, 0}; },
                    [](double, Vec2) { return Vec2{1.0, 0.0}; }, false, "smooth"),
              0.5, 1.0};
    c.outer = b1;
    c.inner = b1i;
    c.rhs = constant(-1.0);
    c.boundary = zero;
    c.occupation_f = seg;
    c.h = 1.0 / 64;
    s.push_back(c);
  }
  {
    SuiteCase c;
    c.name = "checkerboard-line";
    c.spec = {field(1, [](double, Vec2 x) { return SymMat2{std::fmod(std::floor(x.x / 0.3), 2.0) == 0 ? 1.0 : 0.2, 0, 0}; },
                    no_drift(), false, "checkerboard"),
              0.2, 0.0};
    c.outer = b1;
    c.inner = b1i;
    c.rhs = [](double, Vec2 x) { return -1.0 - x.x * x.x; };
    c.boundary = zero;
    c.occupation_f = seg;
    c.h = 1.0 / 64;
    c.mc_dt = 2.5e-4;
    s.push_back(c);
  }
  {
    SuiteCase c;
    c.name = "smooth-cylinder-1d";
    c.spec = {field(1, [](double t, Vec2 x) { return SymMat2{1.0 + 0.5 * std::sin(x.x + t), 0, 0}; }, no_drift(),
                    true, "smooth"),
              0.5, 0.0};
    c.outer = c1;
    c.inner = c1i;
    c.rhs = constant(-1.0);
    c.boundary = zero;
    c.occupation_f = upper_half(c1, 0.5);
    c.h = 1.0 / 32;
    s.push_back(c);
  }
  {
    SuiteCase c;
    c.name = "checkerboard-cylinder-1d";
    c.spec = {families::checkerboard(1, 0.2, 0.3), 0.2, 0.0};
    c.outer = c1;
    c.inner = c1i;
    c.rhs = [](double t, Vec2) { return -1.0 - 0.5 * t; };
    c.boundary = zero;
    c.occupation_f = upper_half(c1, 0.5);
    c.h = 1.0 / 32;
    s.push_back(c);
  }
  {
    SuiteCase c;
    c.name = "sign-drift-cylinder-1d";
    c.spec = {families::sign_drift(2.0), 1.0, 2.0};
    c.outer = c1;
    c.inner = c1i;
    c.rhs = constant(-1.0);
    c.boundary = [](double t, Vec2) { return 0.1 * (2.0 - t); };
    c.occupation_f = upper_half(c1, 0.5);
    c.h = 1.0 / 32;
    s.push_back(c);
  }
  {
    SuiteCase c;
    c.name = "radial-cylinder-2d";
    c.spec = {families::radial_degenerate(0.5, {}), 0.5, 0.0};
    c.outer = c2;
    c.inner = c2i;
    c.rhs = constant(-1.0);
    c.boundary = zero;
    c.occupation_f = upper_half(c2, 0.5);
    c.h = 1.0 / 16;
    s.push_back(c);
  }
  return s;
}

}  // namespace

std::vector<SuiteCase> locked_suite() { return build(); }

const SuiteCase& suite_case(const std::string& name) {
  static const std::vector<SuiteCase> suite = build();
  for (const auto& c : suite)
    if (c.name == name) return c;
  throw ValidationError("unknown suite case: " + name);
}

GridFunction solve_case(const SuiteCase& c, int level) {
  const double h = c.h / std::pow(2.0, level);
  const int dim = c.outer.dim();
  const GridSpec spec{dim, dim, h, c.outer.is_cylinder() ? h : 0.0};
  auto grid = classify_boundary(c.outer, spec);
  if (c.outer.is_cylinder()) return solve_parabolic(c.spec, grid, c.rhs, c.boundary).u;
  return solve_elliptic(c.spec, grid, c.rhs, c.boundary).u;
}

StabilityRow hessian_stability(const SuiteCase& c, BoundKind kind, std::optional<double> gamma) {
  CheckOptions opts;
  opts.gamma = gamma;
  opts.p_exp = c.outer.dim() + (c.outer.is_cylinder() ? 1 : 0);
  auto check = [&](const GridFunction& u) {
    return kind == BoundKind::kHessian ? check_hessian_bound(u, c.spec, c.inner, c.outer, opts)
                                       : check_gradient_bound(u, c.spec, c.inner, c.outer, opts);
  };
  StabilityRow row;
  row.name = c.name;
  row.h = c.h;
  row.coarse = check(solve_case(c, 0));
  row.fine = check(solve_case(c, 1));
  row.change = row.coarse.fitted_N > 0.0 ? std::abs(row.fine.fitted_N - row.coarse.fitted_N) / row.coarse.fitted_N
                                         : std::abs(row.fine.fitted_N);
  return row;
}

OccupationStabilityRow occupation_stability(const SuiteCase& c, double gamma, double dt, std::size_t n_paths,
                                            std::uint64_t seed, int threads) {
  OccupationStabilityRow row;
  row.name = c.name;
  row.gamma = gamma;
  const QuadratureSpec quad{1.0 / 128, 1.0 / 128};
  if (dt <= 0.0) dt = c.mc_dt;
  for (int level = 0; level < 2; ++level) {
    SimConfig cfg = config_from_operator(c.spec, c.outer, dt / (1 << level), n_paths, seed + level);
    cfg.threads = threads;
    cfg.functionals.push_back({"f", c.occupation_f, 0.0});
    const auto est = occupation_functional(simulate_paths(cfg), "f");
    (level == 0 ? row.coarse : row.fine) = check_occupation_bound(c.occupation_f, est, gamma, c.outer, quad);
  }
  const double se = std::hypot(row.coarse.fitted_N_stderr, row.fine.fitted_N_stderr);
  row.z = se > 0.0 ? std::abs(row.fine.fitted_N - row.coarse.fitted_N) / se : 0.0;
  return row;
}

}  // namespace lpest
