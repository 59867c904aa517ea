#include "lpest/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"

namespace lpest {

double BoundReport::rhs_sum() const {
  double s = 0.0;
  for (const auto& [label, v] : rhs_terms) s += v;
  return s;
}

void finalize(BoundReport& report) {
  const double rhs = report.rhs_sum();
  if (report.lhs == 0.0) {
    report.ratio = 0.0;
  } else if (rhs > 0.0) {
    report.ratio = report.lhs / rhs;
  } else {
    report.ratio = std::numeric_limits<double>::infinity();
  }
  report.fitted_N = report.ratio;
}

namespace {

// Measure of the cell around `node` inside both balls.
double cell_in_two_balls(int dim, Vec2 node, double h, Vec2 c1, double r1, Vec2 c2, double r2) {
  if (dim == 1) {
    const double lo = std::max({node.x - 0.5 * h, c1.x - r1, c2.x - r2});
    const double hi = std::min({node.x + 0.5 * h, c1.x + r1, c2.x + r2});
    return std::max(0.0, hi - lo);
  }
  const double m1 = clipped_cell_measure(2, node, h, c1, r1);
  const double m2 = clipped_cell_measure(2, node, h, c2, r2);
  const double full = h * h;
  if (m1 == 0.0 || m2 == 0.0) return 0.0;
  if (m1 == full) return m2;
  if (m2 == full) return m1;
  constexpr int kSub = 32;
  int inside = 0;
  for (int a = 0; a < kSub; ++a) {
    for (int b = 0; b < kSub; ++b) {
      const Vec2 p{node.x - 0.5 * h + (a + 0.5) * h / kSub, node.y - 0.5 * h + (b + 0.5) * h / kSub};
      const Vec2 q1 = p - c1, q2 = p - c2;
      if (dot(q1, q1) < r1 * r1 && dot(q2, q2) < r2 * r2) ++inside;
    }
  }
  return full * static_cast<double>(inside) / (kSub * kSub);
}

bool same_ball(const Domain& a, const Domain& b) {
  return a.radius() == b.radius() && a.center().x == b.center().x && a.center().y == b.center().y;
}

// Nodes where derivative-based integrands are used: spatially interior, and
// below the terminal slab for cylinders.
std::vector<unsigned char> derivative_mask(const Grid& g, const Derivatives& d) {
  std::vector<unsigned char> mask(g.size(), 0);
  const int top = g.levels() - 1;
  for (int l = 0; l < g.levels(); ++l) {
    if (g.domain().is_cylinder() && l == top) continue;
    for (int s = 0; s < g.space_size(); ++s) {
      const std::size_t f = g.flat(l, s);
      mask[f] = g.space_interior(s) && d.available[f];
    }
  }
  return mask;
}

void check_gamma(const CheckOptions& o) {
  if (o.gamma && !(*o.gamma > 0.0 && *o.gamma <= 1.0))
    throw ValidationError("gamma must lie in (0, 1]");
  if (o.p_exp <= 0) throw ValidationError("p_exp must be positive");
}

enum class Integrand { kHessian, kGradient };

BoundReport check_bound(const GridFunction& u, const OperatorSpec& spec, const Domain& inner,
                        const Domain& outer, const CheckOptions& options, Integrand which) {
  check_gamma(options);
  const Grid& g = u.grid();
  if (spec.dim() != g.dim()) throw ValidationError("operator and grid dimensions differ");
  const Derivatives d = discrete_derivatives(u);
  const OperatorApplication Lu = apply_operator(spec, u, d);
  const auto mask = derivative_mask(g, d);
  const auto w_in = region_weights(g, inner);
  const auto w_out = region_weights(g, outer);

  std::vector<double> absLu(Lu.values.size());
  for (std::size_t i = 0; i < absLu.size(); ++i) absLu[i] = std::abs(Lu.values[i]);
  const double gamma = options.gamma ? *options.gamma : default_gamma(absLu, w_in, mask);

  BoundReport rep;
  rep.gamma_used = gamma;
  double lhs = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || w_in[i] == 0.0) continue;
    const double mag = which == Integrand::kHessian ? frobenius(d.hess[i], g.dim())
                                                    : (g.dim() == 1 ? std::abs(d.grad[i].x) : norm(d.grad[i]));
    if (mag > 0.0) lhs += w_in[i] * std::pow(mag, gamma);
  }
  rep.lhs = lhs;
  const double p = options.p_exp;
  const double lu_norm = lp_norm(absLu, w_out, p, mask);
  rep.rhs_terms.emplace_back("Lu_norm_pow_gamma", std::pow(lu_norm, gamma));
  const auto bnodes = boundary_nodes(g);
  rep.rhs_terms.emplace_back("boundary_sup_pow_gamma", std::pow(sup_on(u, bnodes), gamma));
  finalize(rep);
  return rep;
}

}  // namespace

std::vector<double> region_weights(const Grid& g, const Domain& region) {
  const Domain& dom = g.domain();
  if (region.dim() != g.dim()) throw ValidationError("region and grid dimensions differ");
  if (region.is_cylinder() && !dom.is_cylinder())
    throw ValidationError("cylinder region on a ball grid");
  std::vector<double> space(static_cast<std::size_t>(g.space_size()), 0.0);
  const bool same = same_ball(region, dom);
  for (int s = 0; s < g.space_size(); ++s) {
    if (!g.has_value(0, s)) continue;
    space[s] = same ? g.space_weights()[s]
                    : cell_in_two_balls(g.dim(), g.coord(s), g.h(), dom.center(), dom.radius(),
                                        region.center(), region.radius());
  }
  std::vector<double> w(g.size(), 0.0);
  for (int l = 0; l < g.levels(); ++l) {
    double tw = 1.0;
    if (dom.is_cylinder()) {
      const double t = g.time(l), k = g.k();
      double lo = std::max(t - 0.5 * k, dom.t0()), hi = std::min(t + 0.5 * k, dom.t1());
      if (region.is_cylinder()) {
        lo = std::max(lo, region.t0());
        hi = std::min(hi, region.t1());
      }
      tw = std::max(0.0, hi - lo);
    }
    if (tw == 0.0) continue;
    for (int s = 0; s < g.space_size(); ++s) w[g.flat(l, s)] = tw * space[s];
  }
  return w;
}

double lp_norm(std::span<const double> values, std::span<const double> weights, double p,
               std::span<const unsigned char> mask) {
  if (!(p > 0.0)) throw ValidationError("lp_norm: p must be positive");
  if (weights.size() != values.size() || (!mask.empty() && mask.size() != values.size()))
    throw ValidationError("lp_norm: size mismatch");
  // Compensated sum keeps quasi-norms of many small cells accurate.
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if ((!mask.empty() && !mask[i]) || weights[i] == 0.0) continue;
    const double a = std::abs(values[i]);
    if (a == 0.0) continue;
    const double y = weights[i] * std::pow(a, p) - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return std::pow(sum, 1.0 / p);
}

double lp_norm(const GridFunction& u, double p, const Domain& region) {
  return lp_norm(u.values(), region_weights(u.grid(), region), p);
}

double lp_norm(const GridFunction& u, double p) { return lp_norm(u, p, u.grid().domain()); }

double sup_on(const GridFunction& u, std::span<const std::pair<int, int>> nodes) {
  if (nodes.empty()) throw ValidationError("sup_on: empty node set");
  double m = 0.0;
  for (const auto& [l, s] : nodes) m = std::max(m, std::abs(u.at(l, s)));
  return m;
}

std::vector<std::pair<int, int>> boundary_nodes(const Grid& g) {
  if (!g.domain().is_cylinder()) return g.nodes_with(NodeTag::kBoundary);
  auto out = g.nodes_with(NodeTag::kLateral);
  const auto term = g.nodes_with(NodeTag::kTerminal);
  out.insert(out.end(), term.begin(), term.end());
  return out;
}

TailData distribution_function(std::span<const double> values, std::span<const double> weights,
                               std::span<const double> lambdas,
                               std::span<const unsigned char> mask) {
  if (weights.size() != values.size() || (!mask.empty() && mask.size() != values.size()))
    throw ValidationError("distribution_function: size mismatch");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) throw ValidationError("distribution_function: levels must be positive");
    if (i > 0 && !(lambdas[i] > lambdas[i - 1]))
      throw ValidationError("distribution_function: levels must be increasing");
  }
  TailData out;
  out.lambda.assign(lambdas.begin(), lambdas.end());
  out.F.assign(lambdas.size(), 0.0);
  // Sort (value, weight) once, then suffix sums give every level.
  std::vector<std::pair<double, double>> vw;
  vw.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    if ((mask.empty() || mask[i]) && weights[i] > 0.0) vw.emplace_back(values[i], weights[i]);
  std::sort(vw.begin(), vw.end());
  std::vector<double> suffix(vw.size() + 1, 0.0);
  for (std::size_t i = vw.size(); i-- > 0;) suffix[i] = suffix[i + 1] + vw[i].second;
  for (std::size_t j = 0; j < lambdas.size(); ++j) {
    const auto it = std::lower_bound(vw.begin(), vw.end(), lambdas[j],
                                     [](const auto& e, double v) { return e.first < v; });
    out.F[j] = suffix[static_cast<std::size_t>(it - vw.begin())];
  }
  return out;
}

TailData distribution_function(const GridFunction& field, std::span<const double> lambdas,
                               const Domain& region) {
  return distribution_function(field.values(), region_weights(field.grid(), region), lambdas);
}

TailFit fit_tail_exponent(const TailData& data) {
  if (data.lambda.size() != data.F.size()) throw ValidationError("fit_tail_exponent: size mismatch");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < data.F.size(); ++i) {
    if (data.F[i] > 0.0 && data.lambda[i] > 0.0) {
      xs.push_back(std::log(data.lambda[i]));
      ys.push_back(std::log(data.F[i]));
    }
  }
  if (xs.size() < 3) throw NumericalError("fit_tail_exponent: need at least 3 samples with F > 0");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw NumericalError("fit_tail_exponent: all levels equal");
  if (syy <= 1e-24 * std::max(1.0, my * my * n))
    throw NumericalError("fit_tail_exponent: degenerate data (F constant)");
  const double slope = sxy / sxx;
  TailFit fit;
  fit.gamma_hat = -slope;
  fit.constant = std::exp(my - slope * mx);
  fit.samples = static_cast<int>(xs.size());
  return fit;
}

double layer_cake_quasinorm(const TailData& data, double q, double total_measure) {
  if (!(q > 0.0)) throw ValidationError("layer_cake_quasinorm: q must be positive");
  const auto& L = data.lambda;
  const auto& F = data.F;
  if (L.empty()) throw ValidationError("layer_cake_quasinorm: no levels");
  double sum = std::pow(L[0], q) * 0.5 * (total_measure + F[0]);
  for (std::size_t i = 0; i + 1 < L.size(); ++i)
    sum += (std::pow(L[i + 1], q) - std::pow(L[i], q)) * 0.5 * (F[i] + F[i + 1]);
  if (F.back() > 0.0) {
    const TailFit fit = fit_tail_exponent(data);
    if (fit.gamma_hat <= q) return std::numeric_limits<double>::infinity();
    sum += q * F.back() * std::pow(L.back(), q) / (fit.gamma_hat - q);
  }
  return sum;
}

double default_gamma(std::span<const double> field, std::span<const double> weights,
                     std::span<const unsigned char> mask) {
  std::vector<double> vals;
  for (std::size_t i = 0; i < field.size(); ++i)
    if ((mask.empty() || mask[i]) && weights[i] > 0.0 && field[i] > 0.0) vals.push_back(field[i]);
  if (vals.size() < 3) return 1.0;
  std::sort(vals.begin(), vals.end());
  const double lo = vals[vals.size() / 2], hi = vals.back();
  if (!(hi > lo * (1.0 + 1e-9))) return 1.0;
  constexpr int kLevels = 12;
  std::vector<double> lambdas(kLevels);
  for (int i = 0; i < kLevels; ++i) lambdas[i] = lo * std::pow(hi / lo, static_cast<double>(i) / kLevels);
  const TailData td = distribution_function(field, weights, lambdas, mask);
  try {
    return std::clamp(fit_tail_exponent(td).gamma_hat, 0.05, 1.0);
  } catch (const NumericalError&) {
    return 1.0;
  }
}

BoundReport check_hessian_bound(const GridFunction& u, const OperatorSpec& spec,
                                const Domain& inner, const Domain& outer,
                                const CheckOptions& options) {
  return check_bound(u, spec, inner, outer, options, Integrand::kHessian);
}

BoundReport check_gradient_bound(const GridFunction& u, const OperatorSpec& spec,
                                 const Domain& inner, const Domain& outer,
                                 const CheckOptions& options) {
  return check_bound(u, spec, inner, outer, options, Integrand::kGradient);
}

double verify_identity_22(const GridFunction& u, const OperatorSpec& spec) {
  const Grid& g = u.grid();
  if (spec.dim() != g.dim()) throw ValidationError("operator and grid dimensions differ");
  GridFunction w(u.grid_ptr());
  for (std::size_t i = 0; i < w.values().size(); ++i) w.values()[i] = -u.values()[i] * u.values()[i];
  const Derivatives du = discrete_derivatives(u);
  const Derivatives dw = discrete_derivatives(w);
  const OperatorApplication Lu = apply_operator(spec, u, du);
  const OperatorApplication Lw = apply_operator(spec, w, dw);
  const auto mask = derivative_mask(g, du);
  double res = 0.0;
  for (int l = 0; l < g.levels(); ++l) {
    const double t = g.time(l);
    for (int s = 0; s < g.space_size(); ++s) {
      const std::size_t f = g.flat(l, s);
      if (!mask[f] || !dw.available[f]) continue;
      const Vec2 x = g.coord(s);
      const SymMat2 a = spec.coeffs.a(t, x);
      const double c = spec.coeffs.c(t, x);
      const double v = u.at(l, s);
      const double gterm = -2.0 * v * Lu.values[f] - c * v * v;
      const Vec2 Du = du.grad[f];
      const double fterm = g.dim() == 1 ? 2.0 * a.xx * Du.x * Du.x : 2.0 * dot(Du, apply(a, Du));
      res = std::max(res, std::abs(Lw.values[f] - gterm + fterm));
    }
  }
  return res;
}

std::string to_json(const BoundReport& r) {
  nlohmann::json j;
  j["lhs"] = r.lhs;
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [label, v] : r.rhs_terms) terms.push_back({{"label", label}, {"value", v}});
  j["rhs_terms"] = terms;
  j["ratio"] = std::isfinite(r.ratio) ? nlohmann::json(r.ratio) : nlohmann::json("inf");
  j["gamma_used"] = r.gamma_used;
  j["fitted_N"] = std::isfinite(r.fitted_N) ? nlohmann::json(r.fitted_N) : nlohmann::json("inf");
  j["fitted_N_stderr"] = r.fitted_N_stderr;
  j["inconclusive"] = r.inconclusive;
  return j.dump();
}

std::string to_json(const TailData& d) {
  nlohmann::json j;
  j["lambda"] = d.lambda;
  j["F"] = d.F;
  j["u00"] = d.u00;
  return j.dump();
}

}  // namespace lpest
