#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "nls/fields.hpp"
#include "nls/grid.hpp"

namespace nls {

enum class BCMode { Raw, Dirichlet, Neumann };
enum class CouplingForm {
  Raw,    // L[u] = -tau u_t + D P[u] + A u, D taken from the field directly
  Scaled  // L_{tau,D,sigma,m}[u] = -tau u_t + sigma^{-m} C diag(d) P[u]
          //                        - sigma^{-m} diag(d) u + A u
};

// Vector samples of an R^l-valued function over one period.
// u[k] holds the flattened per-node vectors at time knot k (index p*l + i).
struct StateField {
  std::vector<Eigen::VectorXd> u;

  int knots() const { return static_cast<int>(u.size()); }
  static StateField zeros(int knots, int size);
};

struct OperatorSpec {
  double tau = 1.0;
  double m = 0.0;
  double sigma = 1.0;
  CouplingForm form = CouplingForm::Raw;
  Eigen::MatrixXd C;  // constant coupling matrix (Scaled form)
  MatrixField D;      // Raw: full dispersal matrix; Scaled: diagonal rate field d_i
  MatrixField A;
  KernelSet kernels;
  BCMode bc = BCMode::Raw;
  SpatialGrid grid;
  TimeGrid time;
  int l = 1;

  // Per-species kernel matrices K_j with (K_j)_{pq} = k_j(x_p, x_q, t) w_q,
  // cached when the kernel does not depend on t.
  std::shared_ptr<const std::vector<Eigen::MatrixXd>> kernel_cache;

  void prepare();  // validates shapes and builds the kernel cache
  bool autonomous() const;
  int size() const { return grid.n() * l; }

  Eigen::MatrixXd inflow_matrix(int node, double t) const;  // multiplies P[u]
  Eigen::VectorXd outflow(int node, double t) const;        // sigma^{-m} d_i (Scaled)

  OperatorSpec with_A(MatrixField A_new) const;
  OperatorSpec with_D_scale(double scale) const;  // multiplies the D (or d) field
};

// (K_j u_j) for all species at time t; u flattened (p*l + i).
Eigen::MatrixXd kernel_matrix(const OperatorSpec& spec, int species, double t);

// (M + A - outflow) u at frozen time t.
Eigen::VectorXd apply_spatial(const OperatorSpec& spec, const Eigen::VectorXd& u, double t);

// Dense frozen-time matrix G(t) with apply_spatial(u, t) = G(t) u.
Eigen::MatrixXd assemble_dense(const OperatorSpec& spec, double t, int cap = 4000);

// psi = (alpha I - N)^{-1} phi where N = -tau d/dt + A, solved per node via a
// periodic monodromy solve. phi has steps+1 knots.
StateField resolvent_N(const OperatorSpec& spec, double alpha, const StateField& phi);

// Dirichlet / Neumann variants for weakly coupled specs (diagonal D,
// mass-normalized kernels). The spec's A is interpreted as the a~ part.
OperatorSpec build_bc_variant(const OperatorSpec& spec, BCMode mode);

}  // namespace nls
