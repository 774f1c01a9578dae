#include <doctest.h>

#include <cmath>

#include "nls/approximation.hpp"
#include "nls/presets.hpp"

using namespace nls;

namespace {
SpatialGrid g60() { return build_spatial_grid_1d(0.0, 1.0, 60); }
TimeGrid tg400() { return build_time_grid(400); }
}  // namespace

TEST_CASE("smooth transition functions") {
  CHECK(smooth_step(-1.0) == 0.0);
  CHECK(smooth_step(0.0) == 0.0);
  CHECK(smooth_step(1.0) == 1.0);
  CHECK(smooth_step(2.0) == 1.0);
  CHECK(smooth_step(0.5) == doctest::Approx(0.5));
  CHECK(smooth_pospart(-2.0) == 0.0);
  CHECK(smooth_pospart(3.0) == 3.0);
  for (double x : {0.1, 0.4, 0.9}) {
    CHECK(smooth_pospart(x) >= 0.0);
    CHECK(smooth_pospart(x) <= x);
  }
  MollifierSpec ms = make_mollifier(0.1, 1);
  CHECK(ms.C1 == doctest::Approx(1.0 / 0.443994).epsilon(1e-4));
  CHECK_THROWS_AS(make_mollifier(0.4, 1), std::invalid_argument);
}

TEST_CASE("mollification reproduces constants exactly") {
  SpatialGrid g = g60();
  TimeGrid tg = tg400();
  MatrixField f = constant_field(Eigen::MatrixXd::Constant(1, 1, 2.5), g, tg);
  MollifyResult mr = mollify_periodic(f, 0.1, g, tg);
  CHECK(mr.delta_max <= 1e-10);
}

TEST_CASE("mollification of a smooth oscillation is periodic with O(eps^2) error") {
  SpatialGrid g = g60();
  TimeGrid tg = tg400();
  MatrixField f = sample_field(
      [](const Point&, double t) {
        return Eigen::MatrixXd::Constant(1, 1, std::sin(2.0 * M_PI * t));
      },
      1, g, tg);
  double prev = 1e300;
  for (double eps : {0.2, 0.1, 0.05}) {
    MollifyResult mr = mollify_periodic(f, eps, g, tg);
    CHECK((mr.field.values[0][5] - mr.field.values[tg.steps][5]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(mr.delta_max < prev / 2.5);  // between first and second order
    prev = mr.delta_max;
  }
}

TEST_CASE("mollification of a Lipschitz kink obeys the Lipschitz bound") {
  SpatialGrid g = g60();
  TimeGrid tg = build_time_grid(64);
  MatrixField f = sample_field(
      [](const Point& x, double) {
        return Eigen::MatrixXd::Constant(1, 1, std::abs(x.x - 0.5));
      },
      1, g, tg);
  for (double eps : {0.15, 0.08}) {
    MollifyResult mr = mollify_periodic(f, eps, g, tg);
    CHECK(mr.delta_max <= 1.0 * eps);
  }
  CHECK_THROWS_AS(mollify_periodic(f, 0.34, g, tg), std::invalid_argument);
}

TEST_CASE("lower/upper sequences sandwich the field") {
  SpatialGrid g = g60();
  TimeGrid tg = build_time_grid(128);
  MatrixField A = sample_field(
      [](const Point& x, double t) {
        Eigen::MatrixXd a(2, 2);
        a(0, 0) = 1.0 + 0.3 * std::abs(std::sin(2.0 * M_PI * t));
        a(1, 1) = 0.5;
        a(0, 1) = 0.4 * std::abs(x.x - 0.4);
        a(1, 0) = 0.2 + 0.1 * x.x;
        return a;
      },
      2, g, tg);
  ApproxSequence seq = lower_upper_sequences(A, 3, g, tg, 0.1);
  REQUIRE(seq.levels.size() == 3);
  double prev_delta = 1e300;
  for (const auto& level : seq.levels) {
    for (int k = 0; k <= tg.steps; ++k)
      for (int p = 0; p < g.n(); ++p) {
        const Eigen::MatrixXd& lo = level.A_lower.values[k][p];
        const Eigen::MatrixXd& hi = level.A_upper.values[k][p];
        const Eigen::MatrixXd& mid = A.values[k][p];
        CHECK((mid - lo).minCoeff() >= -1e-13);
        CHECK((hi - mid).minCoeff() >= -1e-13);
        CHECK(lo(0, 1) >= 0.0);
        CHECK(lo(1, 0) >= 0.0);
      }
    CHECK(level.delta_max < prev_delta);
    prev_delta = level.delta_max;
  }
  // constant field: zero deltas, sequences equal to A
  MatrixField C = constant_field(Eigen::MatrixXd::Constant(1, 1, 3.0), g, tg);
  ApproxSequence cs = lower_upper_sequences(C, 2, g, tg, 0.1);
  CHECK(cs.levels[0].delta_max <= 1e-12);
  CHECK((cs.levels[0].A_lower.values[3][7] - C.values[3][7]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("flatten_at_max produces the flattened profile") {
  SpatialGrid g = g60();
  TimeGrid tg = build_time_grid(64);
  double eps = 0.05, r = 0.12;

  SUBCASE("strict interior maximum") {
    MatrixField A = sample_field(
        [](const Point& x, double) {
          return Eigen::MatrixXd::Constant(1, 1, -(x.x - 0.5) * (x.x - 0.5));
        },
        1, g, tg);
    FlattenResult fl = flatten_at_max(A, eps, r, 1.0, g, tg);
    double mx = fl.lambda_orig.maxCoeff();
    const Point& xstar = g.nodes[fl.argmax];
    for (int p = 0; p < g.n(); ++p) {
      double d = dist(g.nodes[p], xstar, 1);
      CHECK(fl.lambda_flat[p] <= fl.lambda_orig[p] + 1e-12);
      CHECK(fl.lambda_flat[p] <= mx - eps + 1e-12);
      if (d <= fl.r_used / 2.0)
        CHECK(fl.lambda_flat[p] == doctest::Approx(mx - eps).epsilon(1e-12));
    }
    // the shifted field has the flattened profile as its lambda_A profile
    LambdaAProfile prof = lambda_A_profile(fl.A_tilde, 1.0, g, tg);
    for (int p = 0; p < g.n(); ++p)
      CHECK(prof.lambda[p] == doctest::Approx(fl.lambda_flat[p]).epsilon(1e-10));
    // and it passes the non-integrability proxy
    CHECK(contact_exponent_fit(prof.lambda, g).flag);
  }

  SUBCASE("flat profile shifts uniformly") {
    MatrixField A = constant_field(Eigen::MatrixXd::Constant(1, 1, 2.0), g, tg);
    FlattenResult fl = flatten_at_max(A, eps, r, 1.0, g, tg);
    for (int p = 0; p < g.n(); ++p)
      CHECK(fl.beta[p] == doctest::Approx(-eps).epsilon(1e-12));
  }

  SUBCASE("boundary maximum is handled one-sided") {
    MatrixField A = sample_field(
        [](const Point& x, double) { return Eigen::MatrixXd::Constant(1, 1, -x.x * x.x); },
        1, g, tg);
    FlattenResult fl = flatten_at_max(A, eps, r, 1.0, g, tg);
    CHECK(fl.argmax == 0);
    for (int p = 0; p < g.n(); ++p)
      CHECK(fl.lambda_flat[p] <= fl.lambda_orig[p] + 1e-12);
  }
}

TEST_CASE("sandwich_check on the Lipschitz scenario") {
  OperatorSpec spec = make_scenario("SCEN-L", {40, 400});
  SandwichTable table = sandwich_check(spec, 2, 0.02);
  CHECK(table.sandwich_ok);
  CHECK(table.gaps_shrinking);
  for (const auto& row : table.rows) {
    CHECK(row.nonintegrable_flag);
    // gap bounded by the construction error budget
    double beta_max = table.sequence.levels[row.level].beta.cwiseAbs().maxCoeff();
    CHECK(row.gap <= 12.0 * row.delta_max + row.epsilon + beta_max + 1e-7);
  }
}
