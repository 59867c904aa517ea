#include "lpest/resolvent.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>

#include "json.hpp"
#include "lpest/csv.hpp"
#include "lpest/estimates.hpp"
#include "lpest/exact_examples.hpp"

namespace lpest {

std::pair<Vec2, Vec2> split_drift(Vec2 b, double mu_cut) {
  if (!(mu_cut >= 0.0)) throw ValidationError("split_drift: cut level must be nonnegative");
  const double n = norm(b);
  if (n <= mu_cut) return {b, Vec2{}};
  const Vec2 b1 = (mu_cut / n) * b;
  return {b1, b - b1};
}

std::pair<VectorFn, VectorFn> split_drift(const VectorFn& b, double mu_cut) {
  if (!(mu_cut >= 0.0)) throw ValidationError("split_drift: cut level must be nonnegative");
  VectorFn b1 = [b, mu_cut](double t, Vec2 x) { return split_drift(b(t, x), mu_cut).first; };
  VectorFn b2 = [b, mu_cut](double t, Vec2 x) { return split_drift(b(t, x), mu_cut).second; };
  return {b1, b2};
}

DriftSamples sample_drift(const VectorFn& b, const Grid& grid, double exterior) {
  if (!(exterior >= 0.0)) throw ValidationError("sample_drift: exterior magnitude must be nonnegative");
  DriftSamples out;
  out.dim = grid.dim();
  out.exterior = exterior;
  const std::vector<double> w = region_weights(grid, grid.domain());
  for (int l = 0; l < grid.levels(); ++l) {
    for (int s = 0; s < grid.space_size(); ++s) {
      const double wt = w[grid.flat(l, s)];
      if (wt <= 0.0) continue;
      const Vec2 v = b(grid.time(l), grid.coord(s));
      out.magnitude.push_back(grid.dim() == 1 ? std::abs(v.x) : norm(v));
      out.weight.push_back(wt);
    }
  }
  return out;
}

double excess_norm(const DriftSamples& b, double mu, double q) {
  if (!(q > 0.0)) throw ValidationError("excess_norm: q must be positive");
  if (mu < b.exterior) return std::numeric_limits<double>::infinity();
  std::vector<double> v(b.magnitude.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(b.magnitude[i] - mu, 0.0);
  return lp_norm(v, b.weight, q);
}

double mu_theta(const DriftSamples& b, double theta, double lambda, double q, Branch branch) {
  if (!(theta > 0.0)) throw ValidationError("mu_theta: theta must be positive");
  if (branch == Branch::kParabolic && !(lambda > 0.0)) throw ValidationError("mu_theta: lambda must be positive");
  const double target =
      branch == Branch::kParabolic ? theta * std::pow(lambda, -1.0 / (2.0 * b.dim + 2.0)) : theta;
  double hi = b.exterior;
  for (double m : b.magnitude) {
    if (!std::isfinite(m)) throw NumericalError("mu_theta: target unreachable, |b| is not finite on the domain");
    hi = std::max(hi, m);
  }
  double lo = b.exterior;
  if (excess_norm(b, lo, q) <= target) return lo;
  // excess_norm(hi) == 0 <= target; shrink [lo, hi] keeping norm(lo) > target >= norm(hi).
  const double tol = 1e-9 * (1.0 + hi);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (excess_norm(b, mid, q) <= target) hi = mid;
    else lo = mid;
  }
  return hi;
}

double nu_theta(const DriftSamples& b2, double theta) {
  if (!(theta > 0.0)) throw ValidationError("nu_theta: theta must be positive");
  if (b2.exterior > 0.0) return std::numeric_limits<double>::infinity();
  const double q = b2.dim + 2.0;
  const double n = lp_norm(b2.magnitude, b2.weight, q);
  return std::pow(n, q) * std::pow(theta, -(b2.dim + 1.0));
}

double lambda_of_mu(double K, const std::function<double(double)>& mu_theta_fn, double mu) {
  if (!(mu > 0.0)) throw ValidationError("lambda_of_mu: mu must be positive");
  if (!(K >= 0.0)) throw ValidationError("lambda_of_mu: K must be nonnegative");
  auto rhs = [&](double lam) { return K * lam + mu_theta_fn(lam) * std::sqrt(lam); };
  double lo = 0.0, hi = 1.0;
  while (rhs(hi) < mu) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericalError("lambda_of_mu: no root (K = 0 and mu_theta vanishes)");
  }
  for (int it = 0; it < 400 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (rhs(mid) < mu) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<BankMember> make_test_bank(const Domain& domain, double width) {
  if (!(width > 0.0)) throw ValidationError("make_test_bank: width must be positive");
  const Vec2 c = domain.center();
  const double R = domain.radius();
  const Vec2 e1{1.0, 0.0};
  auto bump = [](Vec2 at, double s) {
    return ScalarFn([at, s](double, Vec2 x) {
      const Vec2 d = x - at;
      return std::exp(-0.5 * dot(d, d) / (s * s));
    });
  };
  auto name = [](const std::string& kind, double v) { return kind + "_" + csv_number(v); };
  std::vector<BankMember> bank;
  for (double k : {1.0, 2.0, 4.0, 8.0}) bank.push_back({name("bump", k * width), bump(c, k * width)});
  for (double k : {2.0, -2.0, 8.0, -8.0})
    bank.push_back({name("shifted_bump", k * width), bump(c + (k * width) * e1, width)});
  for (double k : {1.0, 4.0, 16.0}) {
    const double r = k * width;
    bank.push_back({name("indicator", r), [c, r](double, Vec2 x) { return norm(x - c) < r ? 1.0 : 0.0; }});
  }
  for (double k : {1.0, 3.0}) {
    const ScalarFn env = bump(c, 4.0 * width);
    bank.push_back({name("oscillatory", k), [env, c, k, width](double t, Vec2 x) {
                      return (1.0 + std::cos(k * (x.x - c.x) / width)) * env(t, x);
                    }});
  }
  bank.push_back({name("wide_bump", R / 8), bump(c, R / 8)});
  bank.push_back({name("wide_bump", R / 3), bump(c, R / 3)});
  bank.push_back({"constant", [](double, Vec2) { return 1.0; }});
  return bank;
}

namespace {

struct MemberResult {
  double norm_u = 0.0, norm_f = 0.0;
  bool negative = false, monotone = true;
};

MemberResult solve_member(const OperatorSpec& spec, double mu, double p, const std::shared_ptr<const Grid>& grid,
                          const std::vector<double>& weights, const BankMember& m,
                          const SolverOptions& options) {
  const Solution sol = apply_resolvent(spec, mu, m.f, grid, options);
  const auto u = sol.u.values();
  const GridFunction f = GridFunction::sample(grid, m.f);
  MemberResult r;
  r.monotone = sol.report.monotone_scheme;
  double umax = 0.0;
  for (double v : u) umax = std::max(umax, std::abs(v));
  std::vector<double> plus(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    plus[i] = std::max(u[i], 0.0);
    if (u[i] < -1e-12 * umax) r.negative = true;
  }
  for (double v : f.values())
    if (v < 0.0) throw ValidationError("test bank member " + m.name + " is negative");
  r.norm_u = lp_norm(plus, weights, p);
  r.norm_f = lp_norm(f.values(), weights, p);
  if (!(r.norm_f > 0.0)) throw ValidationError("test bank member " + m.name + " vanishes on the grid");
  return r;
}

NormEstimate assemble_estimate(const std::vector<MemberResult>& res) {
  NormEstimate est;
  for (std::size_t i = 0; i < res.size(); ++i) {
    est.norm_u.push_back(res[i].norm_u);
    est.norm_f.push_back(res[i].norm_f);
    est.ratio.push_back(res[i].norm_u / res[i].norm_f);
    est.negative_part = est.negative_part || res[i].negative;
    est.monotone = est.monotone && res[i].monotone;
    if (est.ratio.back() > est.value) {
      est.value = est.ratio.back();
      est.argmax = i;
    }
  }
  return est;
}

void check_norm_args(double mu, double p, const std::vector<BankMember>& bank) {
  if (!(mu > 0.0)) throw ValidationError("estimate_operator_norm: mu must be positive");
  if (!(p >= 1.0)) throw ValidationError("estimate_operator_norm: p must be >= 1");
  if (bank.empty()) throw ValidationError("estimate_operator_norm: empty test bank");
}

}  // namespace

NormEstimate estimate_operator_norm_serial(const OperatorSpec& spec, double mu, double p,
                                           std::shared_ptr<const Grid> grid,
                                           const std::vector<BankMember>& bank, const SolverOptions& options) {
  check_norm_args(mu, p, bank);
  const std::vector<double> w = region_weights(*grid, grid->domain());
  std::vector<MemberResult> res;
  for (const auto& m : bank) {
    try {
      res.push_back(solve_member(spec, mu, p, grid, w, m, options));
    } catch (const NumericalError& e) {
      throw NumericalError("resolvent solve failed for bank member " + m.name + ": " + e.what());
    }
  }
  return assemble_estimate(res);
}

NormEstimate estimate_operator_norm(const OperatorSpec& spec, double mu, double p, std::shared_ptr<const Grid> grid,
                                    const std::vector<BankMember>& bank, const SolverOptions& options) {
  check_norm_args(mu, p, bank);
  const std::vector<double> w = region_weights(*grid, grid->domain());
  const auto n = static_cast<long>(bank.size());
  std::vector<MemberResult> res(bank.size());
  std::vector<std::exception_ptr> errors(bank.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    try {
      res[static_cast<std::size_t>(i)] = solve_member(spec, mu, p, grid, w, bank[static_cast<std::size_t>(i)], options);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const NumericalError& e) {
      throw NumericalError("resolvent solve failed for bank member " + bank[i].name + ": " + e.what());
    }
  }
  return assemble_estimate(res);
}

ResolventDiscretization suggest_discretization(double mu, double M, int refine) {
  if (!(mu > 0.0) || !(M >= 0.0) || refine < 0) throw ValidationError("suggest_discretization: bad arguments");
  const double nu = exact::nu_56(M, mu);
  const double scale = M > 0.0 ? std::min(1.0 / nu, 1.0 / M) : 1.0 / nu;
  ResolventDiscretization d;
  d.width = 0.02 * scale / std::pow(2.0, refine);
  d.h = d.width / 3.0;
  d.radius = d.h * std::ceil(std::max(5.0 / nu, 60.0 * d.width) / d.h);
  return d;
}

DichotomyReport check_dichotomy(const OperatorSpec& spec, double M, double p, const std::vector<double>& mu_list,
                                const DiscretizationFn& discretize, bool refine) {
  if (mu_list.empty()) throw ValidationError("check_dichotomy: empty mu list");
  if (!(M >= 0.0)) throw ValidationError("check_dichotomy: M must be nonnegative");
  DichotomyReport rep;
  rep.K = spec.K;
  rep.M = M;
  rep.p = p;
  rep.threshold = (spec.K + 1.0) * M * M;
  for (double mu : mu_list) {
    const auto [grid, width] = discretize(mu, 0);
    const auto bank = make_test_bank(grid->domain(), width);
    const NormEstimate est = estimate_operator_norm(spec, mu, p, grid, bank);
    DichotomyRow row;
    row.mu = mu;
    row.norm_u = est.norm_u[est.argmax];
    row.norm_f = est.norm_f[est.argmax];
    row.ratio = est.value;
    row.mu_ratio = mu * est.value;
    row.mu2_ratio = mu * mu * est.value;
    row.member = bank[est.argmax].name;
    rep.negative_part = rep.negative_part || est.negative_part;
    if (refine) {
      const auto [g2, w2] = discretize(mu, 1);
      const NormEstimate fine = estimate_operator_norm(spec, mu, p, g2, make_test_bank(g2->domain(), w2));
      row.refined_ratio = fine.value;
      rep.negative_part = rep.negative_part || fine.negative_part;
      rep.max_refinement_change = std::max(rep.max_refinement_change, std::abs(fine.value - est.value) / est.value);
    }
    rep.rows.push_back(row);
  }
  std::sort(rep.rows.begin(), rep.rows.end(), [](const auto& a, const auto& b) { return a.mu < b.mu; });
  for (const auto& r : rep.rows) {
    const double n = r.refined_ratio > 0.0 ? r.refined_ratio : r.ratio;
    if (r.mu >= rep.threshold) rep.sup_mu_ratio_above = std::max(rep.sup_mu_ratio_above, r.mu * n);
    if (r.mu <= rep.threshold) rep.sup_mu2_ratio_below = std::max(rep.sup_mu2_ratio_below, r.mu * r.mu * n);
  }
  const auto& lo = rep.rows.front();
  const auto& hi = rep.rows.back();
  const double n_lo = lo.refined_ratio > 0.0 ? lo.refined_ratio : lo.ratio;
  const double n_hi = hi.refined_ratio > 0.0 ? hi.refined_ratio : hi.ratio;
  if (rep.rows.size() >= 2 && n_hi > 0.0) rep.crossover = (lo.mu * lo.mu * n_lo) / (hi.mu * n_hi);
  return rep;
}

DichotomyReport check_dichotomy_56(double M, const std::vector<double>& mu_list, bool refine) {
  OperatorSpec spec{families::sign_drift(M), 1.0, 1.0, OperatorClass::kTraceBounded};
  const DiscretizationFn disc = [M](double mu, int level) {
    const auto d = suggest_discretization(mu, M, level);
    return std::make_pair(classify_boundary(Domain::ball(1, d.radius), GridSpec{1, 1, d.h, 0.0}), d.width);
  };
  return check_dichotomy(spec, M, 1.0, mu_list, disc, refine);
}

void write_csv(std::ostream& out, const DichotomyReport& r) {
  out << "mu,norm_u,norm_f,mu_ratio,mu2_ratio,n_hat,refined_n_hat,member\n";
  for (const auto& row : r.rows)
    out << csv_number(row.mu) << ',' << csv_number(row.norm_u) << ',' << csv_number(row.norm_f) << ','
        << csv_number(row.mu_ratio) << ',' << csv_number(row.mu2_ratio) << ',' << csv_number(row.ratio) << ','
        << csv_number(row.refined_ratio) << ',' << row.member << '\n';
}

std::string to_json(const DichotomyReport& r) {
  nlohmann::json j{{"K", r.K},
                   {"M", r.M},
                   {"p", r.p},
                   {"threshold", r.threshold},
                   {"sup_mu_ratio_above", r.sup_mu_ratio_above},
                   {"sup_mu2_ratio_below", r.sup_mu2_ratio_below},
                   {"crossover", r.crossover},
                   {"max_refinement_change", r.max_refinement_change},
                   {"negative_part", r.negative_part},
                   {"rows", r.rows.size()}};
  return j.dump();
}

}  // namespace lpest
