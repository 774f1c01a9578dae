#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <vector>

#include "nls/grid.hpp"

namespace nls {

using MatrixFn = std::function<Eigen::MatrixXd(const Point&, double)>;

// Sampled l-by-l matrix-valued coefficient on grid nodes x time knots,
// 1-periodic in t by construction (values at the last knot equal the first).
struct MatrixField {
  int l = 1;
  // values[knot][node], each l x l
  std::vector<std::vector<Eigen::MatrixXd>> values;
  MatrixFn analytic;  // optional closed form used for resampling / off-knot evaluation
  bool has_analytic = false;
  bool time_independent = false;

  int knots() const { return static_cast<int>(values.size()); }
  int n_nodes() const { return values.empty() ? 0 : static_cast<int>(values[0].size()); }
  const Eigen::MatrixXd& at(int node, int knot) const { return values[knot][node]; }

  // Value at an arbitrary time: closed form when available, otherwise linear
  // interpolation between knots (periodic).
  Eigen::MatrixXd at_time(const SpatialGrid& grid, int node, double t) const;

  double max_abs() const;
};

MatrixField sample_field(const MatrixFn& spec, int l, const SpatialGrid& grid,
                         const TimeGrid& tg, double periodicity_tol = 1e-10);
MatrixField constant_field(const Eigen::MatrixXd& value, const SpatialGrid& grid,
                           const TimeGrid& tg);
// Tabulated-only field (oracle support); periodicity enforced by copying knot 0 to the end.
MatrixField tabulated_field(std::vector<std::vector<Eigen::MatrixXd>> values, int l);

// Per-species dispersal kernel. Either a generic evaluator k(x,y,t) or a
// convolution profile k(x-y,t) carrying its sigma-scaling.
struct Kernel {
  std::function<double(const Point&, const Point&, double)> k;
  bool convolution = false;
  std::function<double(const Point&, double)> profile;  // defined when convolution
  double sigma = 1.0;
  double support_radius = std::numeric_limits<double>::infinity();
  bool time_independent = true;
  bool mass_normalized = false;

  double operator()(const Point& x, const Point& y, double t) const { return k(x, y, t); }
};

struct KernelSet {
  int l = 1;
  int dim = 1;
  std::vector<Kernel> kernels;
};

// Built-in convolution profiles on the unit support |z| <= 1, mass 1 over R^N.
Kernel kernel_uniform(int dim);
Kernel kernel_triangle(int dim);            // (1-|z|)+ normalized
Kernel kernel_truncated_gaussian(int dim);  // exp(-8|z|^2) on |z|<=1, normalized
// Generic kernels.
Kernel kernel_constant(double value);  // k(x,y,t) = value on Omega x Omega
Kernel kernel_rank_one(std::function<double(const Point&)> f,
                       std::function<double(const Point&)> g);

KernelSet rescale_kernel(const KernelSet& ks, double sigma);

// integral over R^N of k_i(z,t) |z|^2 dz, per species and time knot.
std::vector<Eigen::VectorXd> kernel_second_moment(const KernelSet& ks, const TimeGrid& tg);
// integral over R^N of k_i(z,t) dz, per species and time knot.
std::vector<Eigen::VectorXd> kernel_mass(const KernelSet& ks, const TimeGrid& tg);

struct StructureReport {
  bool rates_ok = false;        // D entries >= 0 with positive diagonal, 1-periodic
  bool cooperative = false;     // off-diagonal entries of A >= 0
  bool irreducible = false;     // cooperative, and D or A irreducible at every sample
  bool kernels_ok = false;      // kernels nonnegative with k_i(x,x,t) > 0
  bool factorized = false;      // D = C D0 with a constant matrix C
  bool normalized_convolution = false;  // convolution form with unit mass over R^N
  bool dirichlet = false;       // factorized + normalized_convolution with C = I
  bool constant_symmetric_rates = false;  // D, D0 constant in (x,t), D symmetric,
                                          // diag D = D0
  bool symmetric_kernel_and_A = false;    // one common symmetric kernel, A symmetric
  bool D_irreducible = false;
  bool A_irreducible = false;
};

StructureReport check_structure(const MatrixField& D, const MatrixField& A,
                                const MatrixField& D0, const Eigen::MatrixXd& C,
                                const KernelSet& kernels, const SpatialGrid& grid,
                                const TimeGrid& tg);

// Strong connectivity of the nonzero pattern (entries below 1e-14 treated as zero)
// at every sampled (node, knot).
bool field_irreducible(const MatrixField& F, double zero_tol = 1e-14);
bool matrix_irreducible(const Eigen::MatrixXd& M, double zero_tol = 1e-14);

}  // namespace nls
