#include <doctest.h>

#include <cmath>

#include "nls/asymptotics.hpp"
#include "nls/presets.hpp"

using namespace nls;

TEST_CASE("dispersal-rate sweep approaches max lambda_A and diverges for large rates") {
  OperatorSpec base = make_scenario("SCEN-F", {100, 64});
  SweepResult sw = sweep_dispersal_rate(base, {1.0, 0.1, 0.001, 0.0}, {}, 2);
  REQUIRE(sw.rows.size() == 4);
  // scale -> 0 approaches max_x lambda_A = max a(x)
  CHECK(std::abs(sw.rows[2].s - sw.predicted_limit) <= 0.05);
  // decoupled limit point: exact up to the eigensolve tolerance
  CHECK(sw.rows[3].s == doctest::Approx(sw.predicted_limit).epsilon(1e-6));
  // raw specs without outflow stay above max lambda_A when mass is added
  OperatorSpec raw = make_scenario("SCEN-A", {60, 64});
  SweepResult swr = sweep_dispersal_rate(raw, {1.0, 0.3, 0.01}, {});
  LambdaAProfile prof = lambda_A_profile(raw.A, raw.tau, raw.grid, raw.time);
  for (const auto& row : swr.rows) CHECK(row.s >= prof.max_lambda - 1e-7);
}

TEST_CASE("large dispersal rates drive s below any bound under Dirichlet outflow") {
  OperatorSpec base = make_scenario("SCEN-F", {100, 64});
  SweepResult sw = sweep_dispersal_rate(base, {10.0, 100.0, 1000.0}, {});
  CHECK(sw.rows[2].s < -100.0);
  // monotone divergence
  CHECK(sw.rows[0].s > sw.rows[1].s);
  CHECK(sw.rows[1].s > sw.rows[2].s);
}

TEST_CASE("dispersal-range sweep, m = 0, sigma to infinity") {
  OperatorSpec base = make_scenario("SCEN-F", {100, 64});
  base.sigma = 1.0;
  base.kernels = KernelSet{1, 1, {kernel_uniform(1)}};
  base.prepare();
  SweepResult sw = sweep_dispersal_range(base, {2.0, 8.0, 32.0}, 0.0, {}, 2);
  // A0 = -D0 + A: max over the grid of a(x) - d(x)
  CHECK(sw.provenance.find("m = 0") != std::string::npos);
  double prev = 1e300;
  for (const auto& row : sw.rows) {
    double gap = std::abs(row.s - sw.predicted_limit);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev <= 0.05);
}

TEST_CASE("dispersal-range sweep, m = 1, sigma to zero") {
  OperatorSpec base = make_scenario("SCEN-F", {200, 64});
  base.kernels = KernelSet{1, 1, {kernel_uniform(1)}};
  base.sigma = 1.0;
  base.prepare();
  SweepResult sw = sweep_dispersal_range(base, {0.4, 0.2, 0.1}, 1.0, {}, 2);
  CHECK(sw.provenance.find("m in [0,2)") != std::string::npos);
  double prev = 1e300;
  for (const auto& row : sw.rows) {
    double gap = std::abs(row.s - sw.predicted_limit);
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("range sweep refuses under-resolved kernels") {
  OperatorSpec base = make_scenario("SCEN-E", {50, 32});
  CHECK_THROWS_AS(sweep_dispersal_range(base, {0.01}, 2.0, {}), std::invalid_argument);
}

TEST_CASE("frequency sweep monotone with limits") {
  OperatorSpec base = make_scenario("SCEN-G", {60, 128});
  SweepResult sw = sweep_frequency(base, {0.05, 0.5, 5.0, 50.0}, nullptr, {}, 2);
  CHECK(sw.monotonicity_violations == 0);
  CHECK(std::abs(sw.rows[0].s - sw.frozen_average) <= 0.05);
  CHECK(sw.rows.back().s >= sw.lower_bound_constant - 1e-9);

  // time-constant coefficients: s independent of tau
  OperatorSpec flat = make_scenario("SCEN-D", {40, 64});
  SweepResult swf = sweep_frequency(flat, {0.1, 1.0, 10.0}, nullptr, {});
  CHECK(std::abs(swf.rows[0].s - swf.rows[2].s) <= 1e-7);

  // violated rate preconditions are rejected
  CHECK_THROWS_AS(sweep_frequency(base, {0.5, 1.0}, [](double t) { return 1.0 / t; }, {}),
                  std::invalid_argument);
}
