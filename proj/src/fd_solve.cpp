#include "lpest/fd_solve.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace lpest {

GridFunction::GridFunction(std::shared_ptr<const Grid> grid)
    : grid_(std::move(grid)), values_(grid_->size(), 0.0) {}

GridFunction::GridFunction(std::shared_ptr<const Grid> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_->size()) throw ValidationError("GridFunction: value count mismatch");
}

GridFunction GridFunction::sample(std::shared_ptr<const Grid> grid, const ScalarFn& fn) {
  GridFunction g(grid);
  for (int l = 0; l < grid->levels(); ++l) {
    const double t = grid->time(l);
    for (int s = 0; s < grid->space_size(); ++s)
      if (grid->has_value(l, s)) g.at(l, s) = fn(t, grid->coord(s));
  }
  return g;
}

double GridFunction::nearest(double t, Vec2 x) const {
  const Grid& g = *grid_;
  const Vec2 lo = g.coord(0);
  const int i = std::clamp(static_cast<int>(std::lround((x.x - lo.x) / g.h())), 0, g.nx() - 1);
  const int j = g.dim() == 2
                    ? std::clamp(static_cast<int>(std::lround((x.y - lo.y) / g.h())), 0, g.ny() - 1)
                    : 0;
  int level = 0;
  if (g.domain().is_cylinder())
    level = std::clamp(static_cast<int>(std::lround((t - g.domain().t0()) / g.k())), 0,
                       g.levels() - 1);
  const int s = g.index(i, j);
  if (!g.has_value(level, s)) throw ValidationError("GridFunction::nearest: point outside grid domain");
  return at(level, s);
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

// Weights over the 3x3 neighbourhood, w[dj + 1][di + 1]; w[1][1] is the centre.
struct Stencil {
  std::array<std::array<double, 3>, 3> w{};
  double& at(int di, int dj) { return w[dj + 1][di + 1]; }
  double at(int di, int dj) const { return w[dj + 1][di + 1]; }
};

void add_drift(Stencil& st, double b, double diffusion, double h, DriftScheme scheme, bool x_axis) {
  const int px = x_axis ? 1 : 0, py = x_axis ? 0 : 1;
  if (b == 0.0) return;
  if (scheme == DriftScheme::kHybrid && 0.5 * h * std::abs(b) <= diffusion) {
    st.at(px, py) += b / (2.0 * h);
    st.at(-px, -py) -= b / (2.0 * h);
  } else if (b > 0.0) {
    st.at(px, py) += b / h;
    st.at(0, 0) -= b / h;
  } else {
    st.at(-px, -py) += -b / h;
    st.at(0, 0) -= -b / h;
  }
}

// Discretization of a^{ij} D_ij + b^i D_i - c at one node. The cross term uses
// the sign-adapted form of the 9-point difference: for a12 >= 0
//   2 a12 D12 u ~ a12/h^2 [u_NE + u_SW + 2 u - u_E - u_W - u_N - u_S],
// mirrored onto NW/SE for a12 < 0.
Stencil make_stencil(const SymMat2& a, Vec2 b, double c, int dim, double h, DriftScheme scheme) {
  Stencil st;
  const double h2 = h * h;
  if (dim == 1) {
    const double axx = a.xx / h2;
    st.at(1, 0) += axx;
    st.at(-1, 0) += axx;
    st.at(0, 0) -= 2.0 * axx;
    add_drift(st, b.x, axx, h, scheme, true);
  } else {
    const double axx = a.xx / h2, ayy = a.yy / h2, m = std::abs(a.xy) / h2;
    st.at(1, 0) += axx - m;
    st.at(-1, 0) += axx - m;
    st.at(0, 1) += ayy - m;
    st.at(0, -1) += ayy - m;
    if (a.xy >= 0.0) {
      st.at(1, 1) += m;
      st.at(-1, -1) += m;
    } else {
      st.at(-1, 1) += m;
      st.at(1, -1) += m;
    }
    st.at(0, 0) += -2.0 * axx - 2.0 * ayy + 2.0 * m;
    add_drift(st, b.x, axx - m, h, scheme, true);
    add_drift(st, b.y, ayy - m, h, scheme, false);
  }
  st.at(0, 0) -= c;
  return st;
}

bool is_monotone(const Stencil& st) {
  for (int dj = -1; dj <= 1; ++dj)
    for (int di = -1; di <= 1; ++di)
      if ((di != 0 || dj != 0) && st.at(di, dj) < -1e-12 * std::abs(st.at(0, 0))) return false;
  return true;
}

// Direct solver: Thomas algorithm for d = 1 (tridiagonal), sparse LU otherwise.
class DirectSolver {
 public:
  void factor(const SpMat& A, bool tridiagonal) {
    tridiagonal_ = tridiagonal;
    if (tridiagonal) {
      const auto n = static_cast<std::size_t>(A.rows());
      lower_.assign(n, 0.0);
      diag_.assign(n, 0.0);
      upper_.assign(n, 0.0);
      for (int col = 0; col < A.outerSize(); ++col) {
        for (SpMat::InnerIterator it(A, col); it; ++it) {
          const auto r = static_cast<std::size_t>(it.row());
          const auto cidx = static_cast<std::size_t>(it.col());
          if (r == cidx) diag_[r] = it.value();
          else if (cidx + 1 == r) lower_[r] = it.value();
          else if (r + 1 == cidx) upper_[r] = it.value();
          else throw NumericalError("DirectSolver: matrix is not tridiagonal");
        }
      }
      // Forward elimination, stored for repeated solves.
      cprime_.assign(n, 0.0);
      denom_.assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double d = diag_[i] - (i > 0 ? lower_[i] * cprime_[i - 1] : 0.0);
        if (d == 0.0 || !std::isfinite(d)) throw NumericalError("linear system is singular");
        denom_[i] = d;
        cprime_[i] = upper_[i] / d;
      }
      return;
    }
    lu_.analyzePattern(A);
    lu_.factorize(A);
    if (lu_.info() != Eigen::Success)
      throw NumericalError("linear system is singular (sparse LU failed: " + lu_.lastErrorMessage() + ")");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    if (tridiagonal_) {
      const auto n = static_cast<std::size_t>(rhs.size());
      Eigen::VectorXd x(rhs.size());
      std::vector<double> dprime(n);
      for (std::size_t i = 0; i < n; ++i)
        dprime[i] = (rhs[static_cast<Eigen::Index>(i)] - (i > 0 ? lower_[i] * dprime[i - 1] : 0.0)) / denom_[i];
      for (std::size_t k = n; k-- > 0;) {
        const double next = k + 1 < n ? x[static_cast<Eigen::Index>(k + 1)] : 0.0;
        x[static_cast<Eigen::Index>(k)] = dprime[k] - cprime_[k] * next;
      }
      return x;
    }
    Eigen::VectorXd x = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success) throw NumericalError("sparse LU solve failed");
    return x;
  }

 private:
  bool tridiagonal_ = false;
  std::vector<double> lower_, diag_, upper_, cprime_, denom_;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
};

// Spatial system at one time: A u_unknown + coupling = L_h u on interior nodes.
struct SpatialSystem {
  SpMat A;
  // Per unknown: stencil weights on boundary (known) neighbours, as (node, weight).
  std::vector<std::vector<std::pair<int, double>>> known;
  bool monotone = true;
};

struct UnknownMap {
  std::vector<int> of_node;  // -1 for non-unknowns
  std::vector<int> node_of;
};

UnknownMap map_unknowns(const Grid& g) {
  UnknownMap m;
  m.of_node.assign(g.space_size(), -1);
  for (int s = 0; s < g.space_size(); ++s) {
    if (g.space_interior(s)) {
      m.of_node[s] = static_cast<int>(m.node_of.size());
      m.node_of.push_back(s);
    }
  }
  return m;
}

SpatialSystem assemble(const OperatorSpec& spec, const Grid& g, const UnknownMap& map, double t,
                       double extra_diagonal, DriftScheme scheme) {
  SpatialSystem sys;
  const auto n = static_cast<Eigen::Index>(map.node_of.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * (g.dim() == 1 ? 3 : 7));
  sys.known.resize(map.node_of.size());
  for (std::size_t row = 0; row < map.node_of.size(); ++row) {
    const int s = map.node_of[row];
    const Vec2 x = g.coord(s);
    const Stencil st = make_stencil(spec.coeffs.a(t, x), spec.coeffs.b(t, x), spec.coeffs.c(t, x),
                                    g.dim(), g.h(), scheme);
    if (!is_monotone(st)) sys.monotone = false;
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        double w = st.at(di, dj);
        if (di == 0 && dj == 0) w += extra_diagonal;
        if (w == 0.0) continue;
        const int q = g.neighbour(s, di, dj);
        if (q < 0 || g.space_tag(q) == NodeTag::kExterior)
          throw NumericalError("stencil reaches outside the tagged grid");
        const int col = map.of_node[q];
        if (col >= 0) {
          trip.emplace_back(static_cast<int>(row), col, w);
        } else {
          sys.known[row].emplace_back(q, w);
        }
      }
    }
  }
  sys.A.resize(n, n);
  sys.A.setFromTriplets(trip.begin(), trip.end());
  sys.A.makeCompressed();
  return sys;
}

void require_elliptic(const OperatorSpec& spec, const Grid& g) {
  if (spec.dim() != g.dim()) throw ValidationError("operator and grid dimensions differ");
  if (!(spec.delta > 0.0 && spec.delta <= 1.0)) throw ValidationError("delta must be in (0, 1]");
  for (int l = 0; l < g.levels(); ++l) {
    const double t = g.time(l);
    for (int s = 0; s < g.space_size(); ++s) {
      if (!g.space_interior(s)) continue;
      const Vec2 x = g.coord(s);
      const SymMat2 a = spec.coeffs.a(t, x);
      if (eigenvalues(a, g.dim()).first <= 0.0)
        throw ValidationError("operator is not elliptic at a grid node");
      if (spec.coeffs.c(t, x) < 0.0) throw ValidationError("operator has c < 0 at a grid node");
    }
    if (!spec.coeffs.time_dependent) break;
  }
}

// Backward-error scale ||b|| + ||A|| ||x|| in the max norm.
double residual_scale(const SpMat& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  if (b.size() == 0) return 1.0;
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(A.rows());
  for (int col = 0; col < A.outerSize(); ++col)
    for (SpMat::InnerIterator it(A, col); it; ++it) rows[it.row()] += std::abs(it.value());
  return 1e-300 + b.cwiseAbs().maxCoeff() + rows.maxCoeff() * x.cwiseAbs().maxCoeff();
}

// d = 1 elliptic solve without sparse assembly: interior nodes form one run.
Solution solve_line(const OperatorSpec& spec, std::shared_ptr<const Grid> grid, const ScalarFn& rhs,
                    const ScalarFn& boundary, const SolverOptions& options) {
  const Grid& g = *grid;
  GridFunction u(grid);
  int first = -1, last = -1;
  for (int s = 0; s < g.space_size(); ++s) {
    if (g.space_tag(s) == NodeTag::kBoundary) u.at(0, s) = boundary(0.0, g.coord(s));
    if (g.space_interior(s)) {
      if (first < 0) first = s;
      if (last >= 0 && s != last + 1) throw NumericalError("interior nodes are not contiguous");
      last = s;
    }
  }
  Solution out{std::move(u), {}};
  if (first < 0) return out;
  const auto n = static_cast<std::size_t>(last - first + 1);
  std::vector<double> lo(n), diag(n), up(n), b(n);
  bool monotone = true;
  for (std::size_t i = 0; i < n; ++i) {
    const int s = first + static_cast<int>(i);
    const Vec2 x = g.coord(s);
    const Stencil st = make_stencil(spec.coeffs.a(0.0, x), spec.coeffs.b(0.0, x), spec.coeffs.c(0.0, x), 1,
                                    g.h(), options.drift);
    monotone = monotone && is_monotone(st);
    lo[i] = st.at(-1, 0);
    diag[i] = st.at(0, 0);
    up[i] = st.at(1, 0);
    b[i] = rhs(0.0, x);
  }
  b[0] -= lo[0] * out.u.at(0, first - 1);
  b[n - 1] -= up[n - 1] * out.u.at(0, last + 1);
  // Thomas elimination on copies, keeping the system for the residual.
  std::vector<double> cp(n), dp(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = diag[i] - (i > 0 ? lo[i] * cp[i - 1] : 0.0);
    if (d == 0.0 || !std::isfinite(d)) throw NumericalError("linear system is singular");
    cp[i] = up[i] / d;
    dp[i] = (b[i] - (i > 0 ? lo[i] * dp[i - 1] : 0.0)) / d;
  }
  for (std::size_t i = n; i-- > 0;) {
    const double v = dp[i] - cp[i] * (i + 1 < n ? out.u.at(0, first + static_cast<int>(i) + 1) : 0.0);
    if (!std::isfinite(v)) throw NumericalError("solve produced non-finite values");
    out.u.at(0, first + static_cast<int>(i)) = v;
  }
  double res = 0.0, bmax = 0.0, amax = 0.0, xmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int s = first + static_cast<int>(i);
    const double r = lo[i] * (i > 0 ? out.u.at(0, s - 1) : 0.0) + diag[i] * out.u.at(0, s) +
                     up[i] * (i + 1 < n ? out.u.at(0, s + 1) : 0.0) - b[i];
    res = std::max(res, std::abs(r));
    bmax = std::max(bmax, std::abs(b[i]));
    amax = std::max(amax, std::abs(lo[i]) + std::abs(diag[i]) + std::abs(up[i]));
    xmax = std::max(xmax, std::abs(out.u.at(0, s)));
  }
  out.report.residual_norm = res;
  out.report.monotone_scheme = monotone;
  if (res > options.residual_tolerance * (1e-300 + bmax + amax * xmax)) throw NumericalError("elliptic solve residual above tolerance");
  return out;
}

}  // namespace

Solution solve_elliptic(const OperatorSpec& spec, std::shared_ptr<const Grid> grid,
                        const ScalarFn& rhs, const ScalarFn& boundary, const SolverOptions& options) {
  const Grid& g = *grid;
  if (g.domain().is_cylinder()) throw ValidationError("solve_elliptic needs a ball domain");
  require_elliptic(spec, g);
  if (g.dim() == 1) return solve_line(spec, grid, rhs, boundary, options);
  const UnknownMap map = map_unknowns(g);
  SpatialSystem sys = assemble(spec, g, map, 0.0, 0.0, options.drift);

  GridFunction u(grid);
  for (int s = 0; s < g.space_size(); ++s)
    if (g.space_tag(s) == NodeTag::kBoundary) u.at(0, s) = boundary(0.0, g.coord(s));

  Eigen::VectorXd b(static_cast<Eigen::Index>(map.node_of.size()));
  for (std::size_t row = 0; row < map.node_of.size(); ++row) {
    double v = rhs(0.0, g.coord(map.node_of[row]));
    for (const auto& [q, w] : sys.known[row]) v -= w * u.at(0, q);
    b[static_cast<Eigen::Index>(row)] = v;
  }
  DirectSolver solver;
  solver.factor(sys.A, g.dim() == 1);
  const Eigen::VectorXd x = solver.solve(b);
  if (!x.allFinite()) throw NumericalError("solve produced non-finite values");
  for (std::size_t row = 0; row < map.node_of.size(); ++row)
    u.at(0, map.node_of[row]) = x[static_cast<Eigen::Index>(row)];

  Solution out{std::move(u), {}};
  out.report.residual_norm = x.size() ? (sys.A * x - b).cwiseAbs().maxCoeff() : 0.0;
  out.report.monotone_scheme = sys.monotone;
  out.report.iterations = 1;
  if (out.report.residual_norm > options.residual_tolerance * residual_scale(sys.A, x, b))
    throw NumericalError("elliptic solve residual above tolerance");
  return out;
}

Solution solve_parabolic(const OperatorSpec& spec, std::shared_ptr<const Grid> grid,
                         const ScalarFn& rhs, const ScalarFn& boundary, const SolverOptions& options) {
  const Grid& g = *grid;
  if (!g.domain().is_cylinder()) throw ValidationError("solve_parabolic needs a cylinder domain");
  require_elliptic(spec, g);
  const UnknownMap map = map_unknowns(g);
  const int top = g.levels() - 1;
  const double k = g.k();

  GridFunction u(grid);
  for (int l = 0; l <= top; ++l) {
    const double t = g.time(l);
    for (int s = 0; s < g.space_size(); ++s) {
      const NodeTag tag = g.tag(l, s);
      if (tag == NodeTag::kLateral || tag == NodeTag::kTerminal) u.at(l, s) = boundary(t, g.coord(s));
    }
  }

  SpatialSystem sys;
  DirectSolver solver;
  bool factored = false;
  bool monotone = true;
  double residual = 0.0;
  int steps = 0;
  for (int l = top - 1; l >= 0; --l) {
    const double t = g.time(l);
    if (!factored || spec.coeffs.time_dependent) {
      // (u^{l+1} - u^l)/k + A u^l = rhs  =>  (A - I/k) u^l = rhs - u^{l+1}/k
      sys = assemble(spec, g, map, t, -1.0 / k, options.drift);
      solver.factor(sys.A, g.dim() == 1);
      factored = true;
      monotone = monotone && sys.monotone;
    }
    Eigen::VectorXd b(static_cast<Eigen::Index>(map.node_of.size()));
    for (std::size_t row = 0; row < map.node_of.size(); ++row) {
      const int s = map.node_of[row];
      double v = rhs(t, g.coord(s)) - u.at(l + 1, s) / k;
      for (const auto& [q, w] : sys.known[row]) v -= w * u.at(l, q);
      b[static_cast<Eigen::Index>(row)] = v;
    }
    const Eigen::VectorXd x = solver.solve(b);
    if (!x.allFinite()) throw NumericalError("parabolic step produced non-finite values");
    for (std::size_t row = 0; row < map.node_of.size(); ++row)
      u.at(l, map.node_of[row]) = x[static_cast<Eigen::Index>(row)];
    if (x.size()) {
      const double r = (sys.A * x - b).cwiseAbs().maxCoeff();
      if (r > options.residual_tolerance * residual_scale(sys.A, x, b))
        throw NumericalError("parabolic step residual above tolerance");
      residual = std::max(residual, r);
    }
    ++steps;
  }
  Solution out{std::move(u), {}};
  out.report.residual_norm = residual;
  out.report.iterations = steps;
  out.report.monotone_scheme = monotone;
  return out;
}

Solution apply_resolvent(const OperatorSpec& spec, double mu, const ScalarFn& f,
                         std::shared_ptr<const Grid> grid, const SolverOptions& options) {
  if (!(mu > 0.0)) throw ValidationError("apply_resolvent: mu must be positive");
  OperatorSpec shifted_spec = spec;
  shifted_spec.coeffs = shifted(spec.coeffs, mu);
  // (mu - L) u = f  <=>  (L - mu) u = -f
  const ScalarFn neg = [&f](double t, Vec2 x) { return -f(t, x); };
  const ScalarFn zero = [](double, Vec2) { return 0.0; };
  if (grid->domain().is_cylinder()) return solve_parabolic(shifted_spec, grid, neg, zero, options);
  return solve_elliptic(shifted_spec, grid, neg, zero, options);
}

Derivatives discrete_derivatives(const GridFunction& u) {
  const Grid& g = u.grid();
  const int dim = g.dim();
  if (g.nx() < 3 || (dim == 2 && g.ny() < 3)) throw ValidationError("discrete_derivatives: grid too small");
  const double h = g.h();
  const std::size_t total = g.size();
  Derivatives d;
  d.grad.assign(total, {});
  d.hess.assign(total, {});
  d.dt.assign(total, 0.0);
  d.available.assign(total, 0);

  // First and second difference along one axis; false when no stencil fits.
  auto axis = [&](int level, int s, int di, int dj, double& first, double& second) {
    auto val = [&](int q) { return u.at(level, q); };
    auto ok = [&](int q) { return q >= 0 && g.has_value(level, q); };
    const int p = g.neighbour(s, di, dj), m = g.neighbour(s, -di, -dj);
    if (ok(p) && ok(m)) {
      first = (val(p) - val(m)) / (2.0 * h);
      second = (val(p) - 2.0 * val(s) + val(m)) / (h * h);
      return true;
    }
    for (const int sgn : {1, -1}) {
      const int q1 = g.neighbour(s, sgn * di, sgn * dj);
      const int q2 = q1 >= 0 ? g.neighbour(q1, sgn * di, sgn * dj) : -1;
      if (ok(q1) && ok(q2)) {
        first = sgn * (-3.0 * val(s) + 4.0 * val(q1) - val(q2)) / (2.0 * h);
        second = (val(s) - 2.0 * val(q1) + val(q2)) / (h * h);
        return true;
      }
    }
    return false;
  };

  std::vector<unsigned char> gy_ok(total, 0);
  for (int l = 0; l < g.levels(); ++l) {
    for (int s = 0; s < g.space_size(); ++s) {
      if (!g.has_value(l, s)) continue;
      const std::size_t f = g.flat(l, s);
      double fx = 0, sx = 0, fy = 0, sy = 0;
      bool ok = axis(l, s, 1, 0, fx, sx);
      if (dim == 2) {
        const bool oky = axis(l, s, 0, 1, fy, sy);
        gy_ok[f] = oky;
        ok = ok && oky;
      }
      d.grad[f] = {fx, fy};
      d.hess[f].xx = sx;
      d.hess[f].yy = sy;
      d.available[f] = ok;
    }
  }
  if (dim == 2) {
    // D12 = D1 applied to the D2 field.
    for (int l = 0; l < g.levels(); ++l) {
      for (int s = 0; s < g.space_size(); ++s) {
        const std::size_t f = g.flat(l, s);
        if (!d.available[f]) continue;
        auto ok = [&](int q) { return q >= 0 && gy_ok[g.flat(l, q)]; };
        auto gy = [&](int q) { return d.grad[g.flat(l, q)].y; };
        const int e = g.neighbour(s, 1, 0), w = g.neighbour(s, -1, 0);
        if (ok(e) && ok(w)) {
          d.hess[f].xy = (gy(e) - gy(w)) / (2.0 * h);
        } else {
          bool done = false;
          for (const int sgn : {1, -1}) {
            const int q1 = g.neighbour(s, sgn, 0);
            const int q2 = q1 >= 0 ? g.neighbour(q1, sgn, 0) : -1;
            if (ok(q1) && ok(q2)) {
              d.hess[f].xy = sgn * (-3.0 * gy(s) + 4.0 * gy(q1) - gy(q2)) / (2.0 * h);
              done = true;
              break;
            }
          }
          if (!done) d.available[f] = 0;
        }
      }
    }
  }
  if (g.domain().is_cylinder()) {
    const int top = g.levels() - 1;
    const double k = g.k();
    for (int l = 0; l <= top; ++l) {
      for (int s = 0; s < g.space_size(); ++s) {
        if (!g.has_value(l, s)) continue;
        double v;
        if (l > 0 && l < top) v = (u.at(l + 1, s) - u.at(l - 1, s)) / (2.0 * k);
        else if (top >= 2 && l == 0) v = (-3.0 * u.at(0, s) + 4.0 * u.at(1, s) - u.at(2, s)) / (2.0 * k);
        else if (top >= 2) v = (3.0 * u.at(top, s) - 4.0 * u.at(top - 1, s) + u.at(top - 2, s)) / (2.0 * k);
        else v = (u.at(1, s) - u.at(0, s)) / k;
        d.dt[g.flat(l, s)] = v;
      }
    }
  }
  return d;
}

OperatorApplication apply_operator(const OperatorSpec& spec, const GridFunction& u,
                                   const Derivatives& d) {
  const Grid& g = u.grid();
  OperatorApplication out;
  out.values.assign(g.size(), 0.0);
  out.available = d.available;
  for (int l = 0; l < g.levels(); ++l) {
    const double t = g.time(l);
    for (int s = 0; s < g.space_size(); ++s) {
      const std::size_t f = g.flat(l, s);
      if (!d.available[f]) continue;
      const Vec2 x = g.coord(s);
      const SymMat2 a = spec.coeffs.a(t, x);
      const Vec2 b = spec.coeffs.b(t, x);
      const SymMat2& H = d.hess[f];
      double v = a.xx * H.xx + b.x * d.grad[f].x;
      if (g.dim() == 2) v += 2.0 * a.xy * H.xy + a.yy * H.yy + b.y * d.grad[f].y;
      v += d.dt[f] - spec.coeffs.c(t, x) * u.at(l, s);
      out.values[f] = v;
    }
  }
  return out;
}

void write_csv(std::ostream& out, const GridFunction& u) {
  const Grid& g = u.grid();
  out << (g.dim() == 1 ? "t,x,value\n" : "t,x,y,value\n");
  out << std::setprecision(12);
  for (int l = 0; l < g.levels(); ++l) {
    for (int s = 0; s < g.space_size(); ++s) {
      if (!g.has_value(l, s)) continue;
      const Vec2 x = g.coord(s);
      out << g.time(l) << ',' << x.x << ',';
      if (g.dim() == 2) out << x.y << ',';
      out << u.at(l, s) << '\n';
    }
  }
}

std::string to_json(const SolveReport& report) {
  nlohmann::json j;
  j["residual_norm"] = report.residual_norm;
  j["iterations"] = report.iterations;
  j["monotone_scheme"] = report.monotone_scheme;
  return j.dump();
}

}  // namespace lpest
