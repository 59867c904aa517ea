#include "lpest/bellman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "lpest/philox.hpp"

namespace lpest {

double bellman_rhs_1d(double u_xx, double u_x, double delta, double K, double f) {
  return std::min(delta * u_xx, u_xx / delta) - K * std::abs(u_x) + f;
}

namespace {

void validate(const BellmanProblem& p, const Domain& domain) {
  if (domain.dim() != 1 || !domain.is_cylinder())
    throw ValidationError("solve_bellman_1d needs a 1-D cylinder");
  if (!(p.delta > 0.0 && p.delta <= 1.0)) throw ValidationError("bellman: delta must be in (0, 1]");
  if (!(p.K >= 0.0)) throw ValidationError("bellman: K must be nonnegative");
  if (!p.f) throw ValidationError("bellman: f is missing");
  if (p.grid.dim != 1) throw ValidationError("bellman: grid must be one-dimensional");
}

// Controls per unknown: a in {delta, 1/delta}, b in {-K, 0, K}.
struct Policy {
  std::vector<double> a, b;
};

// Tridiagonal solve in place; diag is overwritten.
void thomas(std::vector<double>& lo, std::vector<double>& diag, std::vector<double>& up,
            std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = lo[i] / diag[i - 1];
    diag[i] -= m * up[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  for (std::size_t i = n; i-- > 0;) {
    const double next = i + 1 < n ? rhs[i + 1] : 0.0;
    rhs[i] = (rhs[i] - up[i] * next) / diag[i];
    if (!std::isfinite(rhs[i])) throw NumericalError("bellman: singular step system");
  }
}

}  // namespace

BellmanSolution solve_bellman_1d(const BellmanProblem& problem, const Domain& domain,
                                 const BellmanOptions& options) {
  validate(problem, domain);
  auto grid = classify_boundary(domain, problem.grid);
  const Grid& g = *grid;
  const double h = g.h(), k = g.k(), h2 = h * h;
  const double delta = problem.delta, K = problem.K;

  // Interior nodes form one contiguous run along x; the ring nodes at both ends hold 0.
  std::vector<int> nodes;
  for (int s = 0; s < g.space_size(); ++s)
    if (g.space_interior(s)) nodes.push_back(s);
  const std::size_t n = nodes.size();
  for (std::size_t i = 1; i < n; ++i)
    if (nodes[i] != nodes[i - 1] + 1) throw NumericalError("bellman: interior nodes are not contiguous");

  BellmanSolution out{GridFunction(grid), 0, 0, 0};
  GridFunction& u = out.u;
  Policy pol{std::vector<double>(n, delta), std::vector<double>(n, 0.0)};
  std::vector<double> lo(n), diag(n), up(n), rhs(n), fv(n), prev(n);

  for (int l = g.levels() - 2; l >= 0; --l) {
    const double t = g.time(l);
    for (std::size_t i = 0; i < n; ++i) {
      fv[i] = problem.f(t, g.coord(nodes[i]));
      if (fv[i] < 0.0) throw ValidationError("bellman: f must be nonnegative");
      prev[i] = u.at(l, nodes[i]) = u.at(l + 1, nodes[i]);  // initial guess
    }
    int sweeps = 0;
    for (;;) {
      if (++sweeps > options.max_sweeps)
        throw NumericalError("bellman: policy iteration did not converge within " +
                             std::to_string(options.max_sweeps) + " sweeps at t = " + std::to_string(t));
      // Linear step for the frozen policy:
      //   a D2 u + b+ D+ u - b- D- u - u/k = -f - u^{l+1}/k
      for (std::size_t i = 0; i < n; ++i) {
        const double a = pol.a[i] / h2, bp = std::max(pol.b[i], 0.0) / h, bm = std::max(-pol.b[i], 0.0) / h;
        lo[i] = a + bm;
        up[i] = a + bp;
        diag[i] = -2.0 * a - bp - bm - 1.0 / k;
        rhs[i] = -fv[i] - u.at(l + 1, nodes[i]) / k;
      }
      thomas(lo, diag, up, rhs);
      double change = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        change = std::max(change, std::abs(rhs[i] - prev[i]));
        prev[i] = rhs[i];
        u.at(l, nodes[i]) = rhs[i];
      }
      // Policy improvement; keep the current control unless another is strictly better.
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        const int s = nodes[i];
        const double um = u.at(l, s - 1), uc = u.at(l, s), upv = u.at(l, s + 1);
        const double d2 = (upv - 2.0 * uc + um) / h2;
        const double dp = (upv - uc) / h, dm = (uc - um) / h;
        const double a_best = d2 >= 0.0 ? delta : 1.0 / delta;
        if (a_best * d2 < pol.a[i] * d2) {
          pol.a[i] = a_best;
          changed = true;
        }
        auto drift = [&](double b) { return b > 0.0 ? b * dp : (b < 0.0 ? b * dm : 0.0); };
        double b_best = pol.b[i], v_best = drift(pol.b[i]);
        for (const double b : {-K, 0.0, K}) {
          const double v = drift(b);
          if (v < v_best - 1e-14 * (std::abs(v_best) + 1.0)) {
            v_best = v;
            b_best = b;
          }
        }
        if (b_best != pol.b[i]) {
          pol.b[i] = b_best;
          changed = true;
        }
      }
      if (!changed || (sweeps > 1 && change <= options.tolerance)) break;
    }
    out.max_sweeps = std::max(out.max_sweeps, sweeps);
    out.total_sweeps += sweeps;
    ++out.steps;
  }
  return out;
}

namespace {

SuboptimalityReport compare_linear(const BellmanSolution& bellman, const OperatorSpec& spec,
                                   const ScalarFn& f) {
  const auto& grid = bellman.u.grid_ptr();
  const Grid& g = *grid;
  if (spec.dim() != 1) throw ValidationError("check_suboptimality: spec must be one-dimensional");
  SolverOptions opts;
  opts.drift = DriftScheme::kUpwind;
  const ScalarFn neg = [&f](double t, Vec2 x) { return -f(t, x); };
  const ScalarFn zero = [](double, Vec2) { return 0.0; };
  const Solution lin = solve_parabolic(spec, grid, neg, zero, opts);

  SuboptimalityReport r;
  r.tolerance = 10.0 * g.h() * g.h();
  r.margin = std::numeric_limits<double>::infinity();
  for (int l = 0; l < g.levels(); ++l) {
    for (int s = 0; s < g.space_size(); ++s) {
      if (!g.has_value(l, s)) continue;
      const double m = lin.u.at(l, s) - bellman.u.at(l, s);
      if (m < r.margin) {
        r.margin = m;
        r.worst_t = g.time(l);
        r.worst_x = g.coord(s).x;
      }
    }
  }
  r.holds = r.margin >= -r.tolerance;
  const Vec2 c = g.domain().center();
  r.u_bellman_origin = bellman.u.nearest(g.domain().t0(), c);
  r.u_linear_origin = lin.u.nearest(g.domain().t0(), c);
  return r;
}

void check_class(const OperatorSpec& spec, const Grid& g) {
  for (int l = 0; l < g.levels(); ++l) {
    for (int s = 0; s < g.space_size(); ++s) {
      if (!g.space_interior(s)) continue;
      const double t = g.time(l);
      const Vec2 x = g.coord(s);
      const double a = spec.coeffs.a(t, x).xx;
      if (a < spec.delta * (1 - 1e-12) || a > (1 + 1e-12) / spec.delta || spec.coeffs.c(t, x) != 0.0)
        throw ValidationError("check_suboptimality: spec is not in the operator class");
    }
    if (!spec.coeffs.time_dependent) break;
  }
}

}  // namespace

SuboptimalityReport check_suboptimality(const BellmanSolution& bellman, const OperatorSpec& spec,
                                        const ScalarFn& f) {
  check_class(spec, bellman.u.grid());
  return compare_linear(bellman, spec, f);
}

SuboptimalityReport check_suboptimality(const BellmanSolution& bellman, const OperatorSpec& spec,
                                        const ScalarFn& f, double dt, std::size_t n_paths,
                                        std::uint64_t seed) {
  SuboptimalityReport r = check_suboptimality(bellman, spec, f);
  SimConfig cfg = config_from_operator(spec, bellman.u.grid().domain(), dt, n_paths, seed);
  cfg.functionals.push_back({"f", f, 0.0});
  const auto est = occupation_functional(simulate_paths(cfg), "f");
  r.mc = est;
  r.mc_holds = est.mean >= r.u_bellman_origin - 3.0 * est.std_error;
  return r;
}

std::vector<OperatorSpec> random_admissible_specs(double delta, double K, int count, std::uint64_t seed) {
  if (!(delta > 0.0 && delta <= 1.0) || !(K >= 0.0) || count < 0)
    throw ValidationError("random_admissible_specs: bad arguments");
  std::vector<OperatorSpec> out;
  for (int i = 0; i < count; ++i) {
    const PathRng rng(seed, static_cast<std::uint64_t>(i));
    auto u = [&](std::uint32_t k) { return rng.uniform(k); };
    const double lo = delta, hi = 1.0 / delta;
    const double a0 = lo + (hi - lo) * u(0), amp = u(1), w = 1.0 + 6.0 * u(2), ph = 6.0 * u(3);
    const double b0 = K * (2.0 * u(4) - 1.0), b1 = K * u(5);
    CoefficientField f;
    f.dim = 1;
    // a0 + amp (hi - a0) s with s in [0, 1] stays in [lo, hi].
    f.a = [=](double t, Vec2 x) {
      const double s = 0.5 + 0.5 * std::sin(w * x.x + ph + t);
      return SymMat2{a0 + amp * (hi - a0) * s, 0.0, 0.0};
    };
    f.b = [=](double t, Vec2 x) { return Vec2{std::clamp(b0 + b1 * std::cos(w * x.x - t), -K, K), 0.0}; };
    f.c = [](double, Vec2) { return 0.0; };
    f.time_dependent = true;
    f.name = "random-" + std::to_string(i);
    out.push_back({f, delta, K});
  }
  return out;
}

std::string to_json(const SuboptimalityReport& r) {
  nlohmann::json j{{"holds", r.holds},           {"margin", r.margin},
                   {"tolerance", r.tolerance},   {"worst_t", r.worst_t},
                   {"worst_x", r.worst_x},       {"u_bellman_origin", r.u_bellman_origin},
                   {"u_linear_origin", r.u_linear_origin}};
  if (r.mc) {
    j["mc_mean"] = r.mc->mean;
    j["mc_std_error"] = r.mc->std_error;
    j["mc_n"] = r.mc->n;
    j["mc_holds"] = r.mc_holds;
  }
  return j.dump();
}

}  // namespace lpest
