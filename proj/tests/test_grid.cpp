#include <doctest.h>

#include <cmath>

#include "nls/grid.hpp"

using namespace nls;

TEST_CASE("midpoint grid nodes and weights on [0,1]") {
  SpatialGrid g = build_spatial_grid_1d(0.0, 1.0, 4);
  REQUIRE(g.n() == 4);
  CHECK(g.nodes[0].x == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(g.nodes[1].x == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(g.nodes[2].x == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(g.nodes[3].x == doctest::Approx(0.875).epsilon(1e-15));
  for (int i = 0; i < 4; ++i) CHECK(g.weights[i] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("weights sum to the box volume") {
  for (int n : {3, 7, 50}) {
    SpatialGrid g = build_spatial_grid_1d(0.0, 1.0, n);
    CHECK(g.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  Box box;
  box.dim = 2;
  box.lo = {0.0, 0.0};
  box.hi = {2.0, 1.0};
  SpatialGrid g2 = build_spatial_grid(box, {8, 4});
  REQUIRE(g2.n() == 32);
  CHECK(g2.weights.sum() == doctest::Approx(2.0).epsilon(1e-12));
  SpatialGrid g2t = build_spatial_grid(box, {8, 4}, QuadratureRule::Trapezoid);
  CHECK(g2t.weights.sum() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("degenerate box rejected") {
  Box box;
  box.dim = 1;
  box.lo = {0.0, 0.0};
  box.hi = {0.0, 1.0};
  CHECK_THROWS_AS(build_spatial_grid(box, {4, 4}), std::invalid_argument);
  CHECK_THROWS_AS(build_spatial_grid_1d(0.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("quadrature basics") {
  SpatialGrid g = build_spatial_grid_1d(0.0, 1.0, 100);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(g.n());
  CHECK(quadrature(ones, g) == doctest::Approx(1.0).epsilon(1e-14));
  Eigen::VectorXd xs(g.n());
  for (int i = 0; i < g.n(); ++i) xs[i] = g.nodes[i].x;
  CHECK(quadrature(xs, g) == doctest::Approx(0.5).epsilon(1e-6));
  Eigen::VectorXd bad(3);
  CHECK_THROWS_AS(quadrature(bad, g), std::invalid_argument);
}

TEST_CASE("quadrature error of x^2 decreases at second order") {
  double errs[3];
  int idx = 0;
  for (int n : {50, 100, 200}) {
    SpatialGrid g = build_spatial_grid_1d(0.0, 1.0, n);
    Eigen::VectorXd f(g.n());
    for (int i = 0; i < g.n(); ++i) f[i] = g.nodes[i].x * g.nodes[i].x;
    errs[idx++] = std::abs(quadrature(f, g) - 1.0 / 3.0);
  }
  CHECK(errs[0] / errs[1] > 3.5);
  CHECK(errs[1] / errs[2] > 3.5);
}

TEST_CASE("time grid covers one period") {
  TimeGrid tg = build_time_grid(400);
  CHECK(tg.knots.front() == 0.0);
  CHECK(tg.knots.back() == 1.0);
  CHECK(tg.dt * tg.steps == doctest::Approx(1.0).epsilon(1e-15));
}
