#include "lpest/sde.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>

#include "json.hpp"
#include "lpest/philox.hpp"

namespace lpest {

namespace {

struct Geometry {
  int dim;
  Vec2 center;
  double radius;
  bool cylinder;
  double t_start;
  double t_end;  // cylinders only
  double cap;
  Vec2 start;
};

Geometry make_geometry(const SimConfig& c) {
  if (c.dim != 1 && c.dim != 2) throw ValidationError("simulation dimension must be 1 or 2");
  if (c.domain.dim() != c.dim) throw ValidationError("simulation and domain dimensions differ");
  if (!(c.dt > 0.0)) throw ValidationError("dt must be positive");
  if (c.n_paths == 0) throw ValidationError("n_paths must be positive");
  if (!c.sigma || !c.b) throw ValidationError("sigma and b must be set");
  if (!(c.delta > 0.0 && c.delta <= 1.0)) throw ValidationError("delta must be in (0, 1]");
  for (const auto& f : c.functionals) {
    if (!f.f) throw ValidationError("functional '" + f.name + "' has no function");
    if (!(f.discount >= 0.0)) throw ValidationError("discount must be nonnegative");
  }
  const Domain& d = c.domain;
  Geometry g{c.dim, d.center(), d.radius(), d.is_cylinder(), 0.0, 0.0, 0.0, d.center()};
  if (c.start) g.start = c.dim == 1 ? Vec2{c.start->x, 0.0} : *c.start;
  if (!d.contains_space(g.start)) throw ValidationError("start point is not inside the domain");
  if (g.cylinder) {
    g.t_start = d.t0();
    g.t_end = d.t1();
  }
  const double diam = 2.0 * d.radius();
  g.cap = c.time_cap > 0.0 ? c.time_cap : (g.cylinder ? 10.0 * d.height() : 10.0 * diam * diam / c.delta);
  return g;
}

double dist_to_center(const Geometry& g, Vec2 x) {
  const Vec2 r = x - g.center;
  return g.dim == 1 ? std::abs(r.x) : norm(r);
}

// Probability that the Brownian bridge between two inside points leaves the ball,
// from the half-space formula exp(-2 d0 d1 / (s^2 h)) at the nearest boundary.
double crossing_probability(const Geometry& g, Vec2 x0, Vec2 x1, const SymMat2& sigma, double h) {
  constexpr double kCutoff = 40.0;
  auto half_space = [&](double d0, double d1, double s2) {
    if (s2 <= 0.0) return 0.0;
    const double e = 2.0 * d0 * d1 / (s2 * h);
    return e > kCutoff ? 0.0 : std::exp(-e);
  };
  if (g.dim == 1) {
    const double s2 = sigma.xx * sigma.xx;
    const double hi = g.center.x + g.radius, lo = g.center.x - g.radius;
    const double pu = half_space(hi - x0.x, hi - x1.x, s2);
    const double pl = half_space(x0.x - lo, x1.x - lo, s2);
    return 1.0 - (1.0 - pu) * (1.0 - pl);
  }
  const Vec2 r0 = x0 - g.center;
  const double rho0 = norm(r0);
  if (rho0 == 0.0) return 0.0;
  const Vec2 n = (1.0 / rho0) * r0;
  const Vec2 sn = apply(sigma, n);
  return half_space(g.radius - rho0, g.radius - dist_to_center(g, x1), dot(sn, sn));
}

// Simulates path i; visit(t, elapsed, x, h) is called at the left end of every step.
template <class Visit>
PathRecord run_path(const SimConfig& c, const Geometry& g, std::size_t i, Visit&& visit,
                    std::vector<Vec2>* positions) {
  const PathRng rng(c.seed, i);
  Vec2 x = g.start;
  double elapsed = 0.0;
  PathRecord rec;
  std::array<double, 2> pair{};
  if (positions) positions->push_back(x);
  for (std::uint32_t step = 0;; ++step) {
    if (elapsed >= g.cap) {
      rec.capped = true;
      rec.exit_time = elapsed;
      rec.steps = step;
      return rec;
    }
    const double t = g.t_start + elapsed;
    double h = c.dt;
    bool time_exit = false;
    if (g.cylinder && t + h >= g.t_end - 1e-12 * c.dt) {
      h = g.t_end - t;
      time_exit = true;
    }
    visit(t, elapsed, x, h);
    // d = 1 uses both normals of a pair on consecutive steps.
    if (g.dim == 2 || (step & 1u) == 0) pair = rng.normals(g.dim == 2 ? step : step >> 1);
    const std::array<double, 2> z = g.dim == 2 ? pair : std::array<double, 2>{pair[step & 1u], 0.0};
    const SymMat2 s = c.sigma(t, x);
    const Vec2 b = c.b(t, x);
    const double sq = std::sqrt(h);
    Vec2 xn;
    if (g.dim == 1) {
      xn = {x.x + s.xx * z[0] * sq + b.x * h, 0.0};
    } else {
      const Vec2 dw{z[0] * sq, z[1] * sq};
      xn = x + apply(s, dw) + h * b;
    }
    bool exited = dist_to_center(g, xn) >= g.radius;
    if (!exited && c.exit_rule == ExitRule::kBridge) {
      const double p = crossing_probability(g, x, xn, s, h);
      if (p > 0.0 && rng.uniform(step) < p) exited = true;
    }
    elapsed += h;
    if (exited || time_exit) {
      rec.exit_time = elapsed;
      rec.steps = step + 1;
      return rec;
    }
    x = xn;
    if (positions) positions->push_back(x);
  }
}

std::vector<double> eval_functionals(const SimConfig& c, const Geometry& g, std::size_t i,
                                     PathRecord& rec, std::vector<Vec2>* positions) {
  const std::size_t nf = c.functionals.size();
  std::vector<double> acc(nf, 0.0);
  rec = run_path(c, g, i, [&](double t, double elapsed, Vec2 x, double h) {
    for (std::size_t j = 0; j < nf; ++j) {
      const PathFunctional& pf = c.functionals[j];
      const double v = pf.f(g.cylinder ? t : elapsed, x);
      if (v < 0.0) throw ValidationError("functional '" + pf.name + "' is negative along a path");
      if (v == 0.0) continue;
      acc[j] += (pf.discount > 0.0 ? std::exp(-pf.discount * elapsed) : 1.0) * v * h;
    }
  }, positions);
  return acc;
}

// Runs body(i) for every path, in parallel or serially; exceptions are rethrown
// after the loop (the lowest failing path wins, independent of scheduling).
template <class Body>
void for_each_path(std::size_t n, bool parallel, int threads, Body&& body) {
  std::exception_ptr first;
  std::size_t first_index = std::numeric_limits<std::size_t>::max();
  std::mutex m;
  auto guarded = [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(m);
      if (i < first_index) {
        first_index = i;
        first = std::current_exception();
      }
    }
  };
  const auto count = static_cast<std::int64_t>(n);
  if (parallel) {
    const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 64) num_threads(nt)
    for (std::int64_t i = 0; i < count; ++i) guarded(static_cast<std::size_t>(i));
  } else {
    for (std::int64_t i = 0; i < count; ++i) guarded(static_cast<std::size_t>(i));
  }
  if (first) std::rethrow_exception(first);
}

PathEnsemble simulate(const SimConfig& config, bool parallel) {
  const Geometry g = make_geometry(config);
  PathEnsemble e;
  e.config = config;
  e.paths.resize(config.n_paths);
  e.values.assign(config.functionals.size(), std::vector<double>(config.n_paths, 0.0));
  if (config.store_paths) e.positions.resize(config.n_paths);
  for_each_path(config.n_paths, parallel, config.threads, [&](std::size_t i) {
    std::vector<Vec2>* pos = config.store_paths ? &e.positions[i] : nullptr;
    const auto acc = eval_functionals(config, g, i, e.paths[i], pos);
    for (std::size_t j = 0; j < acc.size(); ++j) e.values[j][i] = acc[j];
  });
  for (const auto& p : e.paths) e.n_capped += p.capped ? 1 : 0;
  return e;
}

std::vector<double> replay(const PathEnsemble& e, const ScalarFn& f, double K) {
  if (!(K >= 0.0)) throw ValidationError("discount K must be nonnegative");
  SimConfig c = e.config;
  c.functionals = {{"replay", f, K}};
  const Geometry g = make_geometry(c);
  std::vector<double> out(e.paths.size(), 0.0);
  for_each_path(out.size(), true, c.threads, [&](std::size_t i) {
    PathRecord rec;
    out[i] = eval_functionals(c, g, i, rec, nullptr)[0];
  });
  return out;
}

}  // namespace

SimConfig config_from_operator(const OperatorSpec& spec, const Domain& domain, double dt,
                               std::size_t n_paths, std::uint64_t seed) {
  SimConfig c;
  c.dim = spec.dim();
  const int dim = spec.dim();
  c.sigma = [a = spec.coeffs.a, dim](double t, Vec2 x) { return sqrt_psd(2.0 * a(t, x), dim); };
  c.b = spec.coeffs.b;
  c.domain = domain;
  c.dt = dt;
  c.n_paths = n_paths;
  c.seed = seed;
  c.delta = spec.delta;
  return c;
}

PathEnsemble simulate_paths(const SimConfig& config) { return simulate(config, true); }

PathEnsemble simulate_paths_serial(const SimConfig& config) { return simulate(config, false); }

std::vector<Vec2> replay_path(const SimConfig& config, std::size_t i) {
  SimConfig c = config;
  c.functionals.clear();
  const Geometry g = make_geometry(c);
  std::vector<Vec2> pos;
  run_path(c, g, i, [](double, double, Vec2, double) {}, &pos);
  return pos;
}

OccupationEstimate summarize(const std::vector<double>& samples) {
  OccupationEstimate est;
  est.n = samples.size();
  if (samples.empty()) return est;
  // Neumaier summation in index order.
  auto neumaier = [&](auto&& term) {
    double sum = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double v = term(samples[i]);
      const double t = sum + v;
      comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
      sum = t;
    }
    return sum + comp;
  };
  const double n = static_cast<double>(samples.size());
  est.mean = neumaier([](double v) { return v; }) / n;
  if (samples.size() > 1) {
    const double ss = neumaier([m = est.mean](double v) { return (v - m) * (v - m); });
    est.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return est;
}

OccupationEstimate exit_time_estimate(const PathEnsemble& e) {
  std::vector<double> t(e.paths.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = e.paths[i].exit_time;
  return summarize(t);
}

OccupationEstimate occupation_functional(const PathEnsemble& e, std::string_view name) {
  for (std::size_t j = 0; j < e.config.functionals.size(); ++j)
    if (e.config.functionals[j].name == name) return summarize(e.values[j]);
  throw ValidationError("no functional named '" + std::string(name) + "' in the ensemble");
}

OccupationEstimate occupation_functional(const PathEnsemble& e, const ScalarFn& f) {
  return summarize(replay(e, f, 0.0));
}

OccupationEstimate discounted_occupation(const PathEnsemble& e, const ScalarFn& f, double K) {
  return summarize(replay(e, f, K));
}

BoundReport check_occupation_bound(const ScalarFn& f, const OccupationEstimate& rhs, double gamma,
                                   const Domain& domain, const QuadratureSpec& quad) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in (0, 1]");
  const auto grid = classify_boundary(domain, {domain.dim(), domain.dim(), quad.h, quad.k});
  const auto w = region_weights(*grid, domain);
  std::vector<double> vals(grid->size(), 0.0);
  const double half = domain.is_cylinder() ? domain.t0() + 0.5 * domain.height() : 0.0;
  for (int l = 0; l < grid->levels(); ++l) {
    const double t = grid->time(l);
    for (int s = 0; s < grid->space_size(); ++s) {
      const std::size_t idx = grid->flat(l, s);
      if (w[idx] == 0.0) continue;
      const double v = f(t, grid->coord(s));
      if (v < 0.0) throw ValidationError("occupation bound needs a nonnegative f");
      if (domain.is_cylinder() && t <= half && v > 0.0)
        throw ValidationError("occupation bound on a cylinder needs f = 0 on the lower half");
      vals[idx] = v;
    }
  }
  BoundReport rep;
  rep.gamma_used = gamma;
  rep.lhs = lp_norm(vals, w, gamma);
  rep.rhs_terms.emplace_back("occupation", rhs.mean);
  finalize(rep);
  if (rhs.mean > 0.0) rep.fitted_N_stderr = rep.lhs * rhs.std_error / (rhs.mean * rhs.mean);
  rep.inconclusive = rhs.n == 0 || rhs.mean <= 3.0 * rhs.std_error;
  return rep;
}

BoundReport check_occupation_bound(const ScalarFn& f, const PathEnsemble& ensemble, double gamma,
                                   const Domain& domain, const QuadratureSpec& quad) {
  return check_occupation_bound(f, occupation_functional(ensemble, f), gamma, domain, quad);
}

std::string to_json(const OccupationEstimate& e) {
  nlohmann::json j;
  j["mean"] = e.mean;
  j["stderr"] = e.std_error;
  j["n"] = e.n;
  return j.dump();
}

void write_paths_csv(std::ostream& out, const PathEnsemble& e) {
  out << "path,exit_time,steps,capped";
  for (const auto& f : e.config.functionals) out << ',' << f.name;
  out << '\n' << std::setprecision(12);
  for (std::size_t i = 0; i < e.paths.size(); ++i) {
    const auto& p = e.paths[i];
    out << i << ',' << p.exit_time << ',' << p.steps << ',' << (p.capped ? 1 : 0);
    for (const auto& v : e.values) out << ',' << v[i];
    out << '\n';
  }
}

}  // namespace lpest
