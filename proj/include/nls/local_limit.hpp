#pragma once

#include <Eigen/Dense>
#include <functional>

#include "nls/fields.hpp"
#include "nls/floquet.hpp"
#include "nls/grid.hpp"
#include "nls/operator_core.hpp"

namespace nls {

// Time-periodic local (Laplacian) Dirichlet eigenproblem on interior nodes of a
// uniform grid; the sigma->0, m=2 reference for the nonlocal operator.
struct LocalProblem {
  int l = 1;
  int dim = 1;
  Box bounds;
  std::array<int, 2> cells{0, 0};  // cells per axis; interior unknowns are cells-1
  double tau = 1.0;
  SpatialGrid grid;  // interior nodes only
  TimeGrid time;
  MatrixField d_r;  // diagonal diffusivity, sampled on the interior grid
  MatrixField A;
};

LocalProblem build_local_problem(const MatrixFn& d_r, const MatrixFn& A, int l, double tau,
                                 const Box& bounds, std::array<int, 2> cells, int steps);

// d_{r,i}(x,t) = d_i(x,t)/(2N) * int k_i(z,t)|z|^2 dz, sampled on d_field's grid.
MatrixField effective_diffusivity(const KernelSet& kernels, const MatrixField& d_field,
                                  const SpatialGrid& grid, const TimeGrid& tg);

// Dense frozen-time matrix of D_r R[.] + A with Dirichlet rows eliminated.
Eigen::MatrixXd assemble_local_dense(const LocalProblem& lp, double t);

SpectralResult local_principal_eigen(const LocalProblem& lp, const SteppingOptions& opts = {});

// The m = 2, sigma -> 0 reference problem of a scaled-form spec: diffusivity
// d_i(x,t) m2_i(t) / (2N) from the base (unit sigma) kernels, same box, same
// cell counts, Dirichlet boundary.
LocalProblem local_problem_from_spec(const OperatorSpec& base);

}  // namespace nls
