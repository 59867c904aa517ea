#pragma once

#include <span>
#include <string>
#include <vector>

#include "lpest/core.hpp"
#include "lpest/domain.hpp"

namespace lpest {

// Coefficients of L = d_t + a^{ij} D_ij + b^i D_i - c.
struct CoefficientField {
  int dim = 2;
  MatrixFn a;
  VectorFn b;
  ScalarFn c;
  bool time_dependent = false;
  std::string name;
};

// Which bound K refers to:
//   kBoundedLowerOrder: |b| + c <= K, c >= 0        (operator class L_{delta,K})
//   kTraceBounded:      tr a + 1 <= K               (resolvent estimates)
enum class OperatorClass { kBoundedLowerOrder, kTraceBounded };

struct OperatorSpec {
  CoefficientField coeffs;
  double delta = 1.0;
  double K = 0.0;
  OperatorClass cls = OperatorClass::kBoundedLowerOrder;

  int dim() const { return coeffs.dim; }
};

// Eigenvalues of a symmetric matrix all lie in [delta, 1/delta].
// `matrix` is row-major dim x dim; asymmetric input throws ValidationError.
bool check_s_delta(std::span<const double> matrix, int dim, double delta);
bool check_s_delta(const SymMat2& a, int dim, double delta);

struct ValidationReport {
  std::size_t samples = 0;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  // Worst ratio max(lambda_max * delta, 1 / (lambda_min / delta)); <= 1 means S_delta holds.
  double ellipticity_ratio = 0.0;
  double max_drift_plus_c = 0.0;
  double max_trace_plus_one = 0.0;
  double min_c = 0.0;
  bool symmetric = true;
  bool ellipticity_ok = true;
  bool bound_ok = true;
  bool pass = true;
};

ValidationReport validate_operator(const OperatorSpec& spec,
                                   std::span<const std::pair<double, Vec2>> samples);

// Grid nodes that carry values plus cell midpoints between them, at every time level.
std::vector<std::pair<double, Vec2>> sample_points(const Grid& grid);

namespace families {

// a = I, b = 0, c = 0.
CoefficientField laplacian(int dim);

// d = 2: a(x) = I - eps (y y^T)/|y|^2 with y = x - shift, identity at y = 0.
SymMat2 degenerate_matrix(Vec2 y, double eps);
CoefficientField radial_degenerate(double eps, Vec2 shift);

// d = 1: a = 1, b(x) = -M sign(x), c = 0.
CoefficientField sign_drift(double M);

// a = diag(1, delta) on "black" squares of side `cell`, diag(delta, 1) on the others;
// d = 1 alternates a = 1 and a = delta. Piecewise constant, sampled without averaging.
CoefficientField checkerboard(int dim, double delta, double cell = 0.3);

}  // namespace families

// Tabulated coefficients from CSV. Columns: coordinates (x or x,y), a entries
// row-major (1 or 4), b entries (1 or 2), c. A header line is required.
// Lookup is nearest tabulated node (piecewise constant).
CoefficientField load_coefficients_csv(const std::string& path, int dim);

// Adds mu to c, i.e. returns the coefficients of L - mu.
CoefficientField shifted(const CoefficientField& field, double mu);

}  // namespace lpest
