#include "lpest/operator.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <fstream>
#include <memory>
#include <limits>
#include <map>
#include <sstream>

namespace lpest {

bool check_s_delta(std::span<const double> matrix, int dim, double delta) {
  if (dim != 1 && dim != 2) throw ValidationError("check_s_delta: dim must be 1 or 2");
  if (matrix.size() != static_cast<std::size_t>(dim * dim))
    throw ValidationError("check_s_delta: matrix has wrong number of entries");
  if (dim == 2) {
    const double scale = std::max({std::abs(matrix[1]), std::abs(matrix[2]), 1.0});
    if (std::abs(matrix[1] - matrix[2]) > 1e-12 * scale)
      throw ValidationError("check_s_delta: matrix is not symmetric");
    return check_s_delta(SymMat2{matrix[0], matrix[1], matrix[3]}, 2, delta);
  }
  return check_s_delta(SymMat2{matrix[0], 0.0, 0.0}, 1, delta);
}

bool check_s_delta(const SymMat2& a, int dim, double delta) {
  if (!(delta > 0.0) || delta > 1.0) throw ValidationError("check_s_delta: delta must be in (0, 1]");
  const auto [lo, hi] = eigenvalues(a, dim);
  // Relative slack for eigenvalues that sit exactly on an endpoint.
  constexpr double kSlack = 1e-12;
  return lo >= delta * (1.0 - kSlack) && hi <= (1.0 / delta) * (1.0 + kSlack);
}

ValidationReport validate_operator(const OperatorSpec& spec,
                                   std::span<const std::pair<double, Vec2>> samples) {
  ValidationReport rep;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  rep.max_eigenvalue = -std::numeric_limits<double>::infinity();
  rep.min_c = std::numeric_limits<double>::infinity();
  const int dim = spec.dim();
  for (const auto& [t, x] : samples) {
    const SymMat2 a = spec.coeffs.a(t, x);
    const Vec2 b = spec.coeffs.b(t, x);
    const double c = spec.coeffs.c(t, x);
    const auto [lo, hi] = eigenvalues(a, dim);
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, lo);
    rep.max_eigenvalue = std::max(rep.max_eigenvalue, hi);
    if (!check_s_delta(a, dim, spec.delta)) rep.ellipticity_ok = false;
    const double bn = dim == 1 ? std::abs(b.x) : norm(b);
    rep.max_drift_plus_c = std::max(rep.max_drift_plus_c, bn + c);
    rep.max_trace_plus_one = std::max(rep.max_trace_plus_one, trace(a, dim) + 1.0);
    rep.min_c = std::min(rep.min_c, c);
    ++rep.samples;
  }
  if (rep.samples == 0) {
    rep.min_eigenvalue = rep.max_eigenvalue = rep.min_c = 0.0;
    return rep;
  }
  rep.ellipticity_ratio = std::max(rep.max_eigenvalue * spec.delta,
                                   rep.min_eigenvalue > 0.0 ? spec.delta / rep.min_eigenvalue
                                                            : std::numeric_limits<double>::infinity());
  const double slack = 1e-12 * std::max(1.0, spec.K);
  if (spec.cls == OperatorClass::kBoundedLowerOrder) {
    rep.bound_ok = rep.max_drift_plus_c <= spec.K + slack;
  } else {
    rep.bound_ok = rep.max_trace_plus_one <= spec.K + slack;
  }
  rep.pass = rep.symmetric && rep.ellipticity_ok && rep.bound_ok && rep.min_c >= 0.0;
  return rep;
}

std::vector<std::pair<double, Vec2>> sample_points(const Grid& grid) {
  std::vector<std::pair<double, Vec2>> out;
  const double h = grid.h();
  for (int l = 0; l < grid.levels(); ++l) {
    const double t = grid.time(l);
    for (int s = 0; s < grid.space_size(); ++s) {
      if (!grid.has_value(l, s)) continue;
      const Vec2 x = grid.coord(s);
      out.emplace_back(t, x);
      // Cell midpoint toward +x (+y); only when it stays inside the ball.
      const Vec2 mid = grid.dim() == 1 ? Vec2{x.x + 0.5 * h, 0.0} : Vec2{x.x + 0.5 * h, x.y + 0.5 * h};
      if (grid.domain().contains_space(mid)) out.emplace_back(t, mid);
    }
  }
  return out;
}

namespace families {

CoefficientField laplacian(int dim) {
  CoefficientField f;
  f.dim = dim;
  f.a = [dim](double, Vec2) { return dim == 1 ? SymMat2{1.0, 0.0, 0.0} : SymMat2::identity(); };
  f.b = [](double, Vec2) { return Vec2{}; };
  f.c = [](double, Vec2) { return 0.0; };
  f.name = "laplacian";
  return f;
}

SymMat2 degenerate_matrix(Vec2 y, double eps) {
  const double r2 = y.x * y.x + y.y * y.y;
  if (r2 == 0.0) return SymMat2::identity();
  return {1.0 - eps * y.x * y.x / r2, -eps * y.x * y.y / r2, 1.0 - eps * y.y * y.y / r2};
}

CoefficientField radial_degenerate(double eps, Vec2 shift) {
  if (!(eps >= 0.0 && eps < 1.0)) throw ValidationError("radial_degenerate: eps must be in [0, 1)");
  CoefficientField f;
  f.dim = 2;
  f.a = [eps, shift](double, Vec2 x) { return degenerate_matrix(x - shift, eps); };
  f.b = [](double, Vec2) { return Vec2{}; };
  f.c = [](double, Vec2) { return 0.0; };
  f.name = "radial-degenerate";
  return f;
}

CoefficientField sign_drift(double M) {
  if (!(M >= 0.0)) throw ValidationError("sign_drift: M must be nonnegative");
  CoefficientField f;
  f.dim = 1;
  f.a = [](double, Vec2) { return SymMat2{1.0, 0.0, 0.0}; };
  f.b = [M](double, Vec2 x) {
    const double s = x.x > 0.0 ? 1.0 : (x.x < 0.0 ? -1.0 : 0.0);
    return Vec2{-M * s, 0.0};
  };
  f.c = [](double, Vec2) { return 0.0; };
  f.name = "sign-drift";
  return f;
}

CoefficientField checkerboard(int dim, double delta, double cell) {
  if (!(delta > 0.0 && delta <= 1.0)) throw ValidationError("checkerboard: delta must be in (0, 1]");
  if (!(cell > 0.0)) throw ValidationError("checkerboard: cell must be positive");
  CoefficientField f;
  f.dim = dim;
  if (dim == 2) {
    f.a = [delta, cell](double, Vec2 x) {
      const auto parity = static_cast<long>(std::floor(x.x / cell) + std::floor(x.y / cell));
      return (parity & 1L) ? SymMat2{delta, 0.0, 1.0} : SymMat2{1.0, 0.0, delta};
    };
  } else {
    // Space-time checkerboard for d = 1.
    f.a = [delta, cell](double t, Vec2 x) {
      const auto parity = static_cast<long>(std::floor(x.x / cell) + std::floor(t / cell));
      return SymMat2{(parity & 1L) ? delta : 1.0, 0.0, 0.0};
    };
    f.time_dependent = true;
  }
  f.b = [](double, Vec2) { return Vec2{}; };
  f.c = [](double, Vec2) { return 0.0; };
  f.name = "checkerboard";
  return f;
}

}  // namespace families

namespace {

struct Table {
  int dim = 1;
  std::vector<double> xs, ys;
  // Per (i, j): a (xx, xy, yy), b (x, y), c.
  std::vector<std::array<double, 6>> rows;

  std::size_t lookup(Vec2 p) const {
    auto nearest = [](const std::vector<double>& axis, double v) {
      auto it = std::lower_bound(axis.begin(), axis.end(), v);
      if (it == axis.end()) return axis.size() - 1;
      if (it == axis.begin()) return std::size_t{0};
      const auto hi = static_cast<std::size_t>(it - axis.begin());
      return (v - axis[hi - 1] <= axis[hi] - v) ? hi - 1 : hi;
    };
    const std::size_t i = nearest(xs, p.x);
    const std::size_t j = dim == 2 ? nearest(ys, p.y) : 0;
    return j * xs.size() + i;
  }
};

}  // namespace

CoefficientField load_coefficients_csv(const std::string& path, int dim) {
  if (dim != 1 && dim != 2) throw ValidationError("coefficient CSV: dim must be 1 or 2");
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open coefficient CSV: " + path);
  const std::size_t ncols = dim == 1 ? 1 + 1 + 1 + 1 : 2 + 4 + 2 + 1;
  std::string line;
  std::getline(in, line);  // header
  std::map<std::pair<double, double>, std::array<double, 6>> entries;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("coefficient CSV: bad number at line " + std::to_string(lineno));
      }
    }
    if (v.size() != ncols)
      throw ValidationError("coefficient CSV: expected " + std::to_string(ncols) +
                            " columns at line " + std::to_string(lineno));
    if (dim == 1) {
      entries[{v[0], 0.0}] = {v[1], 0.0, 0.0, v[2], 0.0, v[3]};
    } else {
      if (std::abs(v[3] - v[4]) > 1e-12 * std::max(1.0, std::abs(v[3])))
        throw ValidationError("coefficient CSV: a is not symmetric at line " + std::to_string(lineno));
      entries[{v[0], v[1]}] = {v[2], v[3], v[5], v[6], v[7], v[8]};
    }
  }
  if (entries.empty()) throw ValidationError("coefficient CSV has no rows: " + path);

  auto table = std::make_shared<Table>();
  table->dim = dim;
  for (const auto& [key, _] : entries) {
    table->xs.push_back(key.first);
    table->ys.push_back(key.second);
  }
  auto uniq = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(table->xs);
  uniq(table->ys);
  if (dim == 1) table->ys = {0.0};
  if (entries.size() != table->xs.size() * table->ys.size())
    throw ValidationError("coefficient CSV: coordinates do not form a tensor grid");
  table->rows.resize(entries.size());
  for (std::size_t j = 0; j < table->ys.size(); ++j)
    for (std::size_t i = 0; i < table->xs.size(); ++i)
      table->rows[j * table->xs.size() + i] = entries.at({table->xs[i], table->ys[j]});

  CoefficientField f;
  f.dim = dim;
  f.a = [table](double, Vec2 x) {
    const auto& r = table->rows[table->lookup(x)];
    return SymMat2{r[0], r[1], r[2]};
  };
  f.b = [table](double, Vec2 x) {
    const auto& r = table->rows[table->lookup(x)];
    return Vec2{r[3], r[4]};
  };
  f.c = [table](double, Vec2 x) { return table->rows[table->lookup(x)][5]; };
  f.name = "csv:" + path;
  return f;
}

CoefficientField shifted(const CoefficientField& field, double mu) {
  CoefficientField f = field;
  f.c = [c = field.c, mu](double t, Vec2 x) { return c(t, x) + mu; };
  return f;
}

}  // namespace lpest
