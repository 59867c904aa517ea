#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "lpest/domain.hpp"
#include "lpest/operator.hpp"

using namespace lpest;

TEST_CASE("make_domain builds balls and shifted cylinders") {
  const Domain c = make_domain(DomainKind::kCylinder, 2, 1.0, 1.0, 1.0, {});
  CHECK(c.is_cylinder());
  CHECK(c.t0() == 1.0);
  CHECK(c.t1() == 2.0);
  CHECK(c.contains(1.5, {0.2, 0.1}));
  CHECK_FALSE(c.contains(0.5, {0.0, 0.0}));

  const Domain b = make_domain(DomainKind::kBall, 2, 1.0);
  CHECK(b.contains(0.0, {0.0, 0.0}));
  CHECK(b.measure() == doctest::Approx(std::numbers::pi));

  // B_{3/2} + e1/2 contains B_1.
  const Domain big = Domain::ball(2, 1.5, {0.5, 0.0});
  for (int k = 0; k < 64; ++k) {
    const double th = 2.0 * std::numbers::pi * k / 64.0;
    CHECK(big.contains_space({0.999 * std::cos(th), 0.999 * std::sin(th)}));
  }

  CHECK_THROWS_AS(make_domain(DomainKind::kBall, 2, 0.0), ValidationError);
  CHECK_THROWS_AS(make_domain(DomainKind::kCylinder, 2, 1.0, -1.0), ValidationError);
  CHECK_THROWS_AS(make_domain(DomainKind::kBall, 3, 1.0), ValidationError);
}

TEST_CASE("parabolic boundary classification") {
  const Domain c = Domain::cylinder(2, 1.0, 1.0);
  CHECK(c.classify(1.0, {0.0, 0.0}) == NodeTag::kTerminal);
  CHECK(c.on_parabolic_boundary(1.0, {0.0, 0.0}));
  CHECK(c.classify(0.0, {0.0, 0.0}) == NodeTag::kInitial);
  CHECK_FALSE(c.on_parabolic_boundary(0.0, {0.0, 0.0}));
  CHECK(c.classify(0.5, {1.0, 0.0}) == NodeTag::kLateral);
  CHECK(c.on_parabolic_boundary(0.5, {1.0, 0.0}));
  // Edge {rho} x dB_r is terminal.
  CHECK(c.classify(1.0, {0.0, 1.0}) == NodeTag::kTerminal);
  CHECK(c.classify(0.5, {2.0, 0.0}) == NodeTag::kExterior);

  const Domain b = Domain::ball(2, 1.0);
  CHECK(b.classify(0.0, {1.0, 0.0}) == NodeTag::kBoundary);
  CHECK(b.classify(0.0, {0.5, 0.0}) == NodeTag::kInterior);
}

TEST_CASE("grid tags partition the nodes") {
  const auto g = classify_boundary(Domain::cylinder(2, 1.0, 1.0), {2, 2, 0.125, 0.25});
  CHECK(g->levels() == 5);
  int terminal = 0, lateral = 0, initial = 0, interior = 0, boundary = 0;
  for (int l = 0; l < g->levels(); ++l) {
    for (int s = 0; s < g->space_size(); ++s) {
      switch (g->tag(l, s)) {
        case NodeTag::kTerminal: ++terminal; break;
        case NodeTag::kLateral: ++lateral; break;
        case NodeTag::kInitial: ++initial; break;
        case NodeTag::kInterior: ++interior; break;
        case NodeTag::kBoundary: ++boundary; break;
        default: break;
      }
    }
  }
  CHECK(boundary == 0);
  CHECK(terminal > 0);
  CHECK(lateral > 0);
  CHECK(initial > 0);
  CHECK(interior == 3 * initial);
  // Every interior node has all 8 neighbours carrying a value.
  for (int s = 0; s < g->space_size(); ++s) {
    if (!g->space_interior(s)) continue;
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        const int q = g->neighbour(s, di, dj);
        REQUIRE(q >= 0);
        CHECK(g->has_value(0, q));
      }
  }
  const int center = g->index(g->nx() / 2, g->ny() / 2);
  CHECK(g->tag(g->levels() - 1, center) == NodeTag::kTerminal);
  CHECK(g->tag(0, center) == NodeTag::kInitial);
}

TEST_CASE("grid/domain mismatch is rejected") {
  CHECK_THROWS_AS(Grid(Domain::ball(1, 1.0), {1, 1, 2.5, 0.0}), ValidationError);
  CHECK_THROWS_AS(Grid(Domain::cylinder(1, 1.0, 1.0), {1, 1, 0.1, 0.3}), ValidationError);
  CHECK_THROWS_AS(Grid(Domain::cylinder(1, 1.0, 1.0), {1, 1, 0.1, 0.0}), ValidationError);
  CHECK_THROWS_AS(Grid(Domain::ball(1, 1.0), {1, 1, 0.0, 0.0}), ValidationError);
}

TEST_CASE("quadrature weights add up to the domain measure") {
  const Grid g2(Domain::ball(2, 1.0), {2, 2, 1.0 / 64, 0.0});
  double area = 0.0;
  for (double w : g2.space_weights()) area += w;
  CHECK(area == doctest::Approx(std::numbers::pi).epsilon(1e-4));

  const Grid g1(Domain::cylinder(1, 2.0, 1.0, 0.0, {0.3, 0.0}), {1, 1, 0.1, 0.25});
  double vol = 0.0;
  for (int l = 0; l < g1.levels(); ++l)
    for (double w : g1.space_weights()) vol += w * g1.time_weight(l);
  CHECK(vol == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("check_s_delta") {
  CHECK(check_s_delta(SymMat2::identity(), 2, 1.0));
  // Degenerate matrix at |x| = 1, eps = 1/2: eigenvalues {1/2, 1}.
  const SymMat2 a = families::degenerate_matrix({1.0, 0.0}, 0.5);
  CHECK(a.xx == doctest::Approx(0.5));
  CHECK(a.yy == doctest::Approx(1.0));
  CHECK(check_s_delta(a, 2, 0.5));
  const std::array<double, 4> bad{2.0, 0.0, 0.0, 0.1};
  CHECK_FALSE(check_s_delta(bad, 2, 0.5));
  const std::array<double, 4> asym{1.0, 0.2, 0.1, 1.0};
  CHECK_THROWS_AS(check_s_delta(asym, 2, 0.5), ValidationError);
}

TEST_CASE("check_s_delta is monotone in delta and holds for the degenerate field at 1 - eps") {
  for (double eps : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (int k = 1; k < 40; ++k) {
      const double th = 0.3 * k;
      const Vec2 x{std::cos(th) * 0.1 * k, std::sin(th) * 0.05 * k};
      const SymMat2 a = families::degenerate_matrix(x, eps);
      const auto [lo, hi] = eigenvalues(a, 2);
      CHECK(lo == doctest::Approx(1.0 - eps));
      CHECK(hi == doctest::Approx(1.0));
      CHECK(check_s_delta(a, 2, 1.0 - eps));
      for (double d2 : {0.9, 0.5, 0.1})
        if (check_s_delta(a, 2, (1.0 - eps))) CHECK(check_s_delta(a, 2, (1.0 - eps) * d2));
    }
  }
  const SymMat2 id = families::degenerate_matrix({0.0, 0.0}, 0.7);
  CHECK(id.xx == 1.0);
  CHECK(id.xy == 0.0);
  CHECK(id.yy == 1.0);
}

TEST_CASE("validate_operator") {
  const auto grid = classify_boundary(Domain::ball(2, 1.0), {2, 2, 0.1, 0.0});
  const auto pts = sample_points(*grid);

  OperatorSpec lap{families::laplacian(2), 1.0, 0.0};
  CHECK(validate_operator(lap, pts).pass);

  OperatorSpec deg{families::radial_degenerate(0.9, {}), 0.5, 0.0};
  const auto rep = validate_operator(deg, pts);
  CHECK_FALSE(rep.pass);
  CHECK(rep.min_eigenvalue == doctest::Approx(0.1));

  OperatorSpec drift{families::laplacian(2), 1.0, 1.0};
  drift.coeffs.b = [](double, Vec2 x) { return Vec2{x.x > 0.5 ? 2.0 : 0.0, 0.0}; };
  const auto rd = validate_operator(drift, pts);
  CHECK_FALSE(rd.bound_ok);
  CHECK_FALSE(rd.pass);

  OperatorSpec tr{families::laplacian(2), 1.0, 3.0, OperatorClass::kTraceBounded};
  CHECK(validate_operator(tr, pts).pass);
  tr.K = 2.5;
  CHECK_FALSE(validate_operator(tr, pts).pass);
}

TEST_CASE("named families") {
  const auto sd = families::sign_drift(3.0);
  CHECK(sd.b(0.0, {2.0, 0.0}).x == -3.0);
  CHECK(sd.b(0.0, {-2.0, 0.0}).x == 3.0);
  CHECK(sd.b(0.0, {0.0, 0.0}).x == 0.0);
  const auto cb = families::checkerboard(2, 0.2);
  CHECK(cb.a(0.0, {0.1, 0.1}).xx == 1.0);
  CHECK(cb.a(0.0, {0.4, 0.1}).xx == 0.2);
  CHECK(cb.a(0.0, {0.4, 0.4}).yy == 0.2);
  CHECK_THROWS_AS(families::radial_degenerate(1.0, {}), ValidationError);
}

TEST_CASE("coefficient fields load from CSV") {
  const std::string path = "coeffs_test.csv";
  {
    std::ofstream out(path);
    out << "x,a,b,c\n";
    out << "-1,1.0,0.5,0.0\n0,2.0,0.0,0.1\n1,1.5,-0.5,0.2\n";
  }
  const auto f = load_coefficients_csv(path, 1);
  CHECK(f.a(0.0, {0.1, 0.0}).xx == 2.0);
  CHECK(f.b(0.0, {-0.9, 0.0}).x == 0.5);
  CHECK(f.c(0.0, {0.8, 0.0}) == 0.2);
  {
    std::ofstream out(path);
    out << "x,y,a11,a12,a21,a22,b1,b2,c\n";
    out << "0,0,1,0.1,0.2,1,0,0,0\n";
  }
  CHECK_THROWS_AS(load_coefficients_csv(path, 2), ValidationError);
  CHECK_THROWS_AS(load_coefficients_csv("missing.csv", 1), ValidationError);
  std::remove(path.c_str());
}
