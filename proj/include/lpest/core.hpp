#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

namespace lpest {

// Invalid input: bad parameters, contract violations, mismatched shapes.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation that was set up correctly but failed numerically
// (singular system, non-convergence, inconclusive estimate).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Points of R^d for d in {1, 2}; y is ignored when d == 1.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }

// Symmetric d x d matrix, d in {1, 2}. For d == 1 only xx is meaningful.
struct SymMat2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  static SymMat2 identity() { return {1.0, 0.0, 1.0}; }
};

inline SymMat2 operator*(double s, const SymMat2& m) { return {s * m.xx, s * m.xy, s * m.yy}; }
inline SymMat2 operator+(const SymMat2& a, const SymMat2& b) {
  return {a.xx + b.xx, a.xy + b.xy, a.yy + b.yy};
}

inline Vec2 apply(const SymMat2& m, Vec2 v) {
  return {m.xx * v.x + m.xy * v.y, m.xy * v.x + m.yy * v.y};
}

inline double trace(const SymMat2& m, int dim) { return dim == 1 ? m.xx : m.xx + m.yy; }

// Frobenius norm restricted to the leading dim x dim block.
inline double frobenius(const SymMat2& m, int dim) {
  if (dim == 1) return std::abs(m.xx);
  return std::sqrt(m.xx * m.xx + 2.0 * m.xy * m.xy + m.yy * m.yy);
}

// Ascending eigenvalues of the leading block.
inline std::pair<double, double> eigenvalues(const SymMat2& m, int dim) {
  if (dim == 1) return {m.xx, m.xx};
  const double mean = 0.5 * (m.xx + m.yy);
  const double rad = std::hypot(0.5 * (m.xx - m.yy), m.xy);
  return {mean - rad, mean + rad};
}

// Principal square root of a positive semidefinite matrix.
// 2x2 closed form: sqrt(A) = (A + s I) / t with s = sqrt(det A), t = sqrt(tr A + 2 s).
inline SymMat2 sqrt_psd(const SymMat2& m, int dim) {
  if (dim == 1) return {std::sqrt(std::max(m.xx, 0.0)), 0.0, 0.0};
  const double det = std::max(m.xx * m.yy - m.xy * m.xy, 0.0);
  const double s = std::sqrt(det);
  const double t = std::sqrt(std::max(m.xx + m.yy + 2.0 * s, 0.0));
  if (t == 0.0) return {};
  return {(m.xx + s) / t, m.xy / t, (m.yy + s) / t};
}

// Scalar, vector and matrix fields of (t, x). Elliptic fields ignore t.
using ScalarFn = std::function<double(double t, Vec2 x)>;
using VectorFn = std::function<Vec2(double t, Vec2 x)>;
using MatrixFn = std::function<SymMat2(double t, Vec2 x)>;

}  // namespace lpest
