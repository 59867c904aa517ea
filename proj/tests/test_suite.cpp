#include <set>

#include "doctest.h"
#include "lpest/suite.hpp"

using namespace lpest;

TEST_CASE("locked suite has ten distinct valid cases") {
  const auto suite = locked_suite();
  REQUIRE(suite.size() == 10);
  std::set<std::string> names;
  int cylinders = 0, lines = 0;
  for (const auto& c : suite) {
    names.insert(c.name);
    CHECK(&suite_case(c.name) != nullptr);
    CHECK(c.spec.dim() == c.outer.dim());
    cylinders += c.outer.is_cylinder();
    lines += c.outer.dim() == 1 && !c.outer.is_cylinder();
    const auto grid = classify_boundary(c.outer, {c.outer.dim(), c.outer.dim(), c.h, c.outer.is_cylinder() ? c.h : 0.0});
    CHECK_MESSAGE(validate_operator(c.spec, sample_points(*grid)).pass, c.name);
  }
  CHECK(names.size() == 10);
  CHECK(cylinders == 4);
  CHECK(lines == 2);
  CHECK_THROWS_AS(suite_case("nope"), ValidationError);
}

TEST_CASE("suite solutions are positive for negative forcing and zero data") {
  for (const char* name : {"checkerboard-ball-2d", "checkerboard-line", "checkerboard-cylinder-1d"}) {
    const GridFunction u = solve_case(suite_case(name), 0);
    double umax = 0.0, umin = 0.0;
    for (double v : u.values()) {
      umax = std::max(umax, v);
      umin = std::min(umin, v);
    }
    CHECK_MESSAGE(umin >= 0.0, name);
    CHECK_MESSAGE(umax > 0.0, name);
  }
}

TEST_CASE("hessian and gradient stability on a line case") {
  const SuiteCase& c = suite_case("smooth-line");
  const StabilityRow h = hessian_stability(c, BoundKind::kHessian, 0.5);
  CHECK(h.coarse.fitted_N > 0.0);
  CHECK(h.change < 0.1);
  CHECK(h.h == doctest::Approx(c.h));
  const StabilityRow g = hessian_stability(c, BoundKind::kGradient, std::nullopt);
  CHECK(g.coarse.gamma_used > 0.0);
  CHECK(g.coarse.gamma_used <= 1.0);
  CHECK(g.change < 0.1);
}

TEST_CASE("occupation stability is reproducible") {
  const SuiteCase& c = suite_case("smooth-line");
  const auto a = occupation_stability(c, 0.5, 0.0, 2000, 5, 1);
  const auto b = occupation_stability(c, 0.5, 0.0, 2000, 5, 3);
  CHECK(a.coarse.fitted_N == b.coarse.fitted_N);
  CHECK(a.fine.fitted_N == b.fine.fitted_N);
  CHECK(a.z >= 0.0);
  CHECK(a.coarse.fitted_N_stderr > 0.0);
}
