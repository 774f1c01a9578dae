#include <doctest.h>

#include <cmath>
#include <random>

#include "nls/fields.hpp"
#include "nls/grid.hpp"

using namespace nls;

namespace {
SpatialGrid grid40() { return build_spatial_grid_1d(0.0, 1.0, 40); }
TimeGrid tg64() { return build_time_grid(64); }
}  // namespace

TEST_CASE("sample_field tabulates constants and enforces periodicity") {
  SpatialGrid g = grid40();
  TimeGrid tg = tg64();
  Eigen::MatrixXd A(2, 2);
  A << 0, 1, 1, 0;
  MatrixField f = constant_field(A, g, tg);
  CHECK(f.time_independent);
  CHECK((f.at(7, 13) - A).cwiseAbs().maxCoeff() == 0.0);

  MatrixField s = sample_field(
      [](const Point&, double t) {
        return Eigen::MatrixXd::Constant(1, 1, std::sin(2.0 * M_PI * t));
      },
      1, g, tg);
  CHECK_FALSE(s.time_independent);
  CHECK((s.values[0][5] - s.values[tg.steps][5]).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(sample_field([](const Point&, double t) {
                    return Eigen::MatrixXd::Constant(1, 1, t);
                  },
                              1, g, tg),
                  std::invalid_argument);
}

TEST_CASE("check_structure decides the named conditions") {
  SpatialGrid g = grid40();
  TimeGrid tg = tg64();
  Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  MatrixField D = constant_field(I2, g, tg);
  Eigen::MatrixXd Afull(2, 2);
  Afull << -1, 1, 1, -1;
  MatrixField A = constant_field(Afull, g, tg);
  MatrixField D0 = D;
  KernelSet ks{2, 1, {kernel_uniform(1), kernel_uniform(1)}};

  StructureReport rep = check_structure(D, A, D0, I2, ks, g, tg);
  CHECK(rep.rates_ok);
  CHECK(rep.cooperative);
  CHECK(rep.irreducible);  // via A
  CHECK(rep.kernels_ok);
  CHECK(rep.factorized);
  CHECK(rep.normalized_convolution);
  CHECK(rep.dirichlet);
  CHECK(rep.constant_symmetric_rates);
  CHECK(rep.symmetric_kernel_and_A);

  MatrixField Adiag = constant_field(Eigen::MatrixXd::Identity(2, 2) * -1.0, g, tg);
  StructureReport rep2 = check_structure(D, Adiag, D0, I2, ks, g, tg);
  CHECK_FALSE(rep2.irreducible);  // both D and A diagonal: reducible

  Eigen::MatrixXd C(2, 2);
  C << 1, 0.5, 0.5, 1;
  Eigen::MatrixXd Dc = C;  // D = C * I
  MatrixField Dfull = constant_field(Dc, g, tg);
  StructureReport rep3 = check_structure(Dfull, A, D0, C, ks, g, tg);
  CHECK(rep3.factorized);
  CHECK_FALSE(rep3.dirichlet);  // C is not the identity
}

TEST_CASE("irreducibility is monotone under adding positive off-diagonals") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    int l = 3;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(l, l);
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < l; ++j)
        if (i != j && unif(rng) < 0.4) A(i, j) = unif(rng);
    bool before = matrix_irreducible(A);
    int i = static_cast<int>(unif(rng) * l) % l;
    int j = (i + 1 + static_cast<int>(unif(rng) * (l - 1)) % (l - 1)) % l;
    A(i, j) = 0.5;
    bool after = matrix_irreducible(A);
    if (before) CHECK(after);
  }
}

TEST_CASE("rescale_kernel changes variables and preserves mass") {
  KernelSet base{1, 1, {kernel_uniform(1)}};
  KernelSet half = rescale_kernel(base, 0.5);
  // k_sigma(z) = (1/sigma) k(z/sigma): uniform becomes height 1 on [-1/2, 1/2]
  CHECK(half.kernels[0].profile({0.2, 0.0}, 0.0) == doctest::Approx(1.0));
  CHECK(half.kernels[0].profile({0.7, 0.0}, 0.0) == doctest::Approx(0.0));
  CHECK(half.kernels[0].support_radius == doctest::Approx(0.5));

  TimeGrid tg = build_time_grid(8);
  for (double s : {0.3, 0.7, 1.0}) {
    auto mass = kernel_mass(rescale_kernel(base, s), tg);
    CHECK(mass[0][0] == doctest::Approx(1.0).epsilon(1e-8));
  }

  // identity at sigma = 1
  KernelSet same = rescale_kernel(base, 1.0);
  for (double z : {0.0, 0.4, 0.9})
    CHECK(same.kernels[0].profile({z, 0.0}, 0.0) ==
          doctest::Approx(base.kernels[0].profile({z, 0.0}, 0.0)).epsilon(1e-14));

  KernelSet generic{1, 1, {kernel_constant(1.0)}};
  CHECK_THROWS_AS(rescale_kernel(generic, 0.5), std::invalid_argument);
}

TEST_CASE("rescaling composes multiplicatively") {
  KernelSet base{1, 1, {kernel_triangle(1)}};
  KernelSet ab = rescale_kernel(rescale_kernel(base, 0.6), 0.5);
  KernelSet prod = rescale_kernel(base, 0.3);
  for (double z : {-0.25, -0.1, 0.0, 0.05, 0.2})
    CHECK(ab.kernels[0].profile({z, 0.0}, 0.0) ==
          doctest::Approx(prod.kernels[0].profile({z, 0.0}, 0.0)).epsilon(1e-12));
}

TEST_CASE("kernel second moments match the closed forms") {
  TimeGrid tg = build_time_grid(8);
  KernelSet uni{1, 1, {kernel_uniform(1)}};
  CHECK(kernel_second_moment(uni, tg)[0][0] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  KernelSet tri{1, 1, {kernel_triangle(1)}};
  CHECK(kernel_second_moment(tri, tg)[0][0] == doctest::Approx(1.0 / 6.0).epsilon(1e-6));

  // scaling law: m2 scales with sigma^2
  for (double s : {0.5, 0.1, 0.02}) {
    KernelSet scaled = rescale_kernel(uni, s);
    CHECK(kernel_second_moment(scaled, tg)[0][0] ==
          doctest::Approx(s * s / 3.0).epsilon(1e-6));
  }

  KernelSet gauss{1, 1, {kernel_truncated_gaussian(1)}};
  CHECK(kernel_mass(gauss, tg)[0][0] == doctest::Approx(1.0).epsilon(1e-8));

  KernelSet generic{1, 1, {kernel_constant(1.0)}};
  CHECK_THROWS_AS(kernel_second_moment(generic, tg), std::invalid_argument);
}

TEST_CASE("2D kernels are mass-normalized") {
  TimeGrid tg = build_time_grid(8);
  using KernelMaker = Kernel (*)(int);
  for (KernelMaker maker : {static_cast<KernelMaker>(kernel_uniform),
                            static_cast<KernelMaker>(kernel_triangle),
                            static_cast<KernelMaker>(kernel_truncated_gaussian)}) {
    KernelSet ks{1, 2, {maker(2)}};
    CHECK(kernel_mass(ks, tg)[0][0] == doctest::Approx(1.0).epsilon(1e-8));
  }
}
