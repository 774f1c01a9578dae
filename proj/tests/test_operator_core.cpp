#include <doctest.h>

#include <cmath>
#include <random>

#include "nls/operator_core.hpp"
#include "nls/presets.hpp"

using namespace nls;

TEST_CASE("apply_spatial on the constant-kernel scalar scenario") {
  OperatorSpec spec = make_scenario("SCEN-A", {100, 64});
  Eigen::VectorXd u = Eigen::VectorXd::Ones(spec.size());
  Eigen::VectorXd v = apply_spatial(spec, u, 0.0);
  // d * integral of 1 over [0,1] + a = 1
  CHECK((v - u).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("apply_spatial on the 2x2 constant scenario") {
  OperatorSpec spec = make_scenario("SCEN-D", {50, 32});
  Eigen::VectorXd u = Eigen::VectorXd::Ones(spec.size());
  Eigen::VectorXd v = apply_spatial(spec, u, 0.25);
  CHECK((v - 2.0 * u).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("rank-one kernel reproduces the analytic eigenpair") {
  OperatorSpec spec = make_scenario("SCEN-B", {200, 32});
  Eigen::VectorXd f(spec.size());
  for (int p = 0; p < spec.grid.n(); ++p) f[p] = 1.0 + spec.grid.nodes[p].x;
  Eigen::VectorXd v = apply_spatial(spec, f, 0.0);
  // integral of (1+x)^2 = 7/3
  CHECK((v - (7.0 / 3.0) * f).cwiseAbs().maxCoeff() < 2e-3);
}

TEST_CASE("assemble_dense is an exact oracle for apply_spatial") {
  OperatorSpec spec = make_scenario("SCEN-A", {4, 16});
  Eigen::MatrixXd G = assemble_dense(spec, 0.0);
  CHECK((G - 0.25 * Eigen::MatrixXd::Ones(4, 4)).cwiseAbs().maxCoeff() < 1e-15);

  OperatorSpec spec2 = make_scenario("SCEN-D", {40, 16});
  Eigen::MatrixXd G2 = assemble_dense(spec2, 0.3);
  std::mt19937 rng(7);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd u(spec2.size());
    for (int i = 0; i < u.size(); ++i) u[i] = gauss(rng);
    Eigen::VectorXd lhs = G2 * u;
    Eigen::VectorXd rhs = apply_spatial(spec2, u, 0.3);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * u.cwiseAbs().maxCoeff());
  }

  CHECK_THROWS_AS(assemble_dense(make_scenario("SCEN-A", {300, 16}), 0.0, 200),
                  std::invalid_argument);
}

TEST_CASE("linearity and Metzler structure") {
  OperatorSpec spec = make_scenario("SCEN-G", {30, 16});
  std::mt19937 rng(11);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd u(spec.size()), v(spec.size());
  for (int i = 0; i < u.size(); ++i) {
    u[i] = gauss(rng);
    v[i] = gauss(rng);
  }
  Eigen::VectorXd sum = apply_spatial(spec, (u + v).eval(), 0.1);
  Eigen::VectorXd parts = apply_spatial(spec, u, 0.1) + apply_spatial(spec, v, 0.1);
  CHECK((sum - parts).cwiseAbs().maxCoeff() <= 1e-12 * sum.cwiseAbs().maxCoeff());

  Eigen::MatrixXd G = assemble_dense(spec, 0.4);
  double min_offdiag = 0.0;
  for (int i = 0; i < G.rows(); ++i)
    for (int j = 0; j < G.cols(); ++j)
      if (i != j) min_offdiag = std::min(min_offdiag, G(i, j));
  CHECK(min_offdiag >= -1e-14);
}

TEST_CASE("resolvent_N inverts the periodic local operator") {
  OperatorSpec spec = make_scenario("SCEN-A", {20, 400});

  SUBCASE("A = 0, constant forcing") {
    StateField phi = StateField::zeros(spec.time.steps + 1, spec.size());
    for (auto& u : phi.u) u.setConstant(3.0);
    StateField psi = resolvent_N(spec, 1.0, phi);
    for (const auto& u : psi.u) CHECK((u.array() - 3.0).abs().maxCoeff() < 1e-9);
  }

  SUBCASE("oscillating coefficient, residual of the inverse") {
    OperatorSpec osc = spec.with_A(sample_field(
        [](const Point&, double t) {
          return Eigen::MatrixXd::Constant(1, 1, std::sin(2.0 * M_PI * t));
        },
        1, spec.grid, spec.time));
    StateField phi = StateField::zeros(osc.time.steps + 1, osc.size());
    for (auto& u : phi.u) u.setOnes();
    double alpha = 2.0;
    StateField psi = resolvent_N(osc, alpha, phi);
    // residual (alpha I - N) psi - phi with 4th order periodic differences
    int steps = osc.time.steps;
    auto wrap = [steps](int i) { return ((i % steps) + steps) % steps; };
    double res = 0.0;
    for (int k = 0; k < steps; ++k) {
      Eigen::VectorXd dpsi = (psi.u[wrap(k - 2)] - 8.0 * psi.u[wrap(k - 1)] +
                              8.0 * psi.u[wrap(k + 1)] - psi.u[wrap(k + 2)]) /
                             (12.0 * osc.time.dt);
      double a = std::sin(2.0 * M_PI * osc.time.knots[k]);
      // N psi = -tau psi_t + a psi
      Eigen::VectorXd lhs = alpha * psi.u[k] - (-osc.tau * dpsi + a * psi.u[k]);
      res = std::max(res, (lhs - phi.u[k]).cwiseAbs().maxCoeff());
    }
    CHECK(res <= 1e-8);
    // positivity of the resolvent
    for (const auto& u : psi.u) CHECK(u.minCoeff() >= 0.0);
  }

  SUBCASE("alpha below the spectral bound of N is rejected") {
    OperatorSpec shifted = spec.with_A(
        constant_field(Eigen::MatrixXd::Constant(1, 1, 2.0), spec.grid, spec.time));
    StateField phi = StateField::zeros(spec.time.steps + 1, spec.size());
    for (auto& u : phi.u) u.setOnes();
    CHECK_THROWS_AS(resolvent_N(shifted, 1.0, phi), std::invalid_argument);
  }
}

TEST_CASE("boundary-condition variants rewrite the diagonal of A") {
  Resolution res{80, 32};
  OperatorSpec spec = make_scenario("SCEN-A", res);
  // mass-normalized kernel needed: uniform, sigma = 0.1
  KernelSet base{1, 1, {kernel_uniform(1)}};
  spec.kernels = rescale_kernel(base, 0.1);
  spec.prepare();

  OperatorSpec dir = build_bc_variant(spec, BCMode::Dirichlet);
  CHECK(dir.bc == BCMode::Dirichlet);
  for (int p = 0; p < dir.grid.n(); ++p)
    CHECK(dir.A.values[0][p](0, 0) == doctest::Approx(-1.0).epsilon(1e-12));

  OperatorSpec neu = build_bc_variant(spec, BCMode::Neumann);
  int mid = dir.grid.n() / 2;
  CHECK(neu.A.values[0][mid](0, 0) == doctest::Approx(-1.0).epsilon(1e-9));
  // near the boundary the Neumann diagonal keeps only the interior mass
  CHECK(neu.A.values[0][0](0, 0) > dir.A.values[0][0](0, 0));

  OperatorSpec strong = make_scenario("SCEN-D", res);
  Eigen::MatrixXd Dc(2, 2);
  Dc << 1, 0.5, 0.5, 1;
  strong.D = constant_field(Dc, strong.grid, strong.time);
  strong.prepare();
  CHECK_THROWS_AS(build_bc_variant(strong, BCMode::Dirichlet), std::invalid_argument);
}
