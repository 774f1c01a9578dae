#include <doctest.h>

#include <cmath>

#include "nls/presets.hpp"
#include "nls/variational.hpp"

using namespace nls;

TEST_CASE("rayleigh ratios of the constant test function") {
  OperatorSpec spec = make_scenario("SCEN-A", {80, 128});
  StateField ones = StateField::zeros(spec.time.steps + 1, spec.size());
  for (auto& u : ones.u) u.setOnes();
  VariationalCertificate cert = rayleigh_bounds(spec, ones);
  CHECK(cert.lower_bound == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cert.upper_bound == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the eigenfunction collapses the certificate gap") {
  OperatorSpec spec = make_scenario("SCEN-D", {60, 128});
  SpectralResult sb = spectral_bound(spec);
  VariationalCertificate cert = rayleigh_bounds(spec, sb.eigenfunction);
  CHECK(cert.upper_bound - cert.lower_bound <=
        10.0 * std::max(sb.residual, 1e-13) + 1e-12);
  CHECK(cert.lower_bound == doctest::Approx(sb.s).epsilon(1e-9));
}

TEST_CASE("arbitrary positive test functions bracket s") {
  OperatorSpec spec = make_scenario("SCEN-C", {60, 256});
  SpectralResult sb = spectral_bound(spec);
  StateField phi = StateField::zeros(spec.time.steps + 1, spec.size());
  for (int k = 0; k <= spec.time.steps; ++k) {
    double t = spec.time.knots[k];
    for (int p = 0; p < spec.grid.n(); ++p)
      phi.u[k][p] = 1.0 + 0.5 * std::sin(2.0 * M_PI * t) * (0.3 + spec.grid.nodes[p].x);
  }
  VariationalCertificate cert = rayleigh_bounds(spec, phi);
  double tol = cert.derivative_truncation + 1e-7;
  CHECK(cert.lower_bound <= sb.s + tol);
  CHECK(cert.upper_bound >= sb.s - tol);

  StateField bad = phi;
  bad.u[3][5] = -0.1;
  CHECK_THROWS_AS(rayleigh_bounds(spec, bad), std::invalid_argument);
}

TEST_CASE("equality certification on closed-form scenarios") {
  EqualityReport a = certify_equality(make_scenario("SCEN-A", {100, 200}), 1e-6);
  CHECK(a.certified);
  CHECK(a.s == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(a.max_gap <= 1e-6);
  CHECK_FALSE(a.used_approximation);

  EqualityReport d = certify_equality(make_scenario("SCEN-D", {100, 200}), 1e-6);
  CHECK(d.certified);
  CHECK(d.s == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("non-smooth coefficients certify through approximation levels") {
  EqualityReport rep = certify_equality(make_scenario("SCEN-L", {40, 400}), 5e-3);
  CHECK(rep.certified);
  CHECK(rep.used_approximation);
  CHECK(rep.max_gap <= 5e-3);
  CHECK(rep.lambda_p_est <= rep.s + 1e-9);
  CHECK(rep.lambda_p_prime_est >= rep.s - 1e-9);
}
