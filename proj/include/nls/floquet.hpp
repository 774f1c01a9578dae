#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "nls/operator_core.hpp"

namespace nls {

enum class Stepper { Auto, CrankNicolson, RK4 };

struct SteppingOptions {
  Stepper stepper = Stepper::Auto;
  int substeps = 0;            // 0: use the system's base step count
  double clip_tol = 1e-13;     // relative clipping threshold for negative undershoot
  double bias_rel_tol = 1e-9;  // eigenvalue bias target for autonomous substep refinement
  double power_tol = 1e-10;    // relative Rayleigh increment tolerance
  double power_vec_tol = 1e-9;  // relative eigenvector residual tolerance
  int power_cap = 50000;
};

// Dense time-periodic linear system tau u' = G(t) u; the common substrate for
// the nonlocal operator and for the local finite-difference problem.
struct LinearPeriodicSystem {
  std::function<Eigen::MatrixXd(double)> assemble;  // G(t), 1-periodic
  double tau = 1.0;
  int size = 0;
  bool autonomous = false;
  int base_steps = 0;  // knots per period for stored fields
};

LinearPeriodicSystem system_of(const OperatorSpec& spec);

// Scaled period map: V0(1,0) = exp(log_scale) * M.
struct Monodromy {
  Eigen::MatrixXd M;
  double log_scale = 0.0;
  Stepper stepper_used = Stepper::CrankNicolson;
  int steps_used = 0;
  double clipped_magnitude = 0.0;
};

Monodromy build_monodromy(const LinearPeriodicSystem& sys, const SteppingOptions& opts = {});
Monodromy build_monodromy(const OperatorSpec& spec, const SteppingOptions& opts = {});

// V0(1,0) v0 by time stepping; refuses on norm blowup beyond 1e12.
Eigen::VectorXd period_map_apply(const OperatorSpec& spec, const Eigen::VectorXd& v0,
                                 const SteppingOptions& opts = {});
// Same, all columns propagated together.
Eigen::MatrixXd period_map_apply_batch(const OperatorSpec& spec, const Eigen::MatrixXd& V0,
                                       const SteppingOptions& opts = {});

struct PowerResult {
  double rho = 0.0;
  Eigen::VectorXd v;
  int iters = 0;
  bool converged = false;
  double gap_estimate = 0.0;
  double clipped = 0.0;
};

PowerResult power_iteration(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                            int size, double tol = 1e-10, int cap = 20000,
                            bool clip_negative = true, double vec_tol = 1e-9);

double dense_spectral_radius(const Eigen::MatrixXd& M);

struct SpectralResult {
  double s = 0.0;
  double rho = 0.0;  // r(V0(1,0)); may overflow to inf for extreme s/tau, s is authoritative
  StateField eigenfunction;          // over the period, max component 1
  StateField adjoint_eigenfunction;  // filled by adjoint_spectral_bound
  int power_iters = 0;
  double residual = 0.0;  // ||L[phi] - s phi||_inf on the time grid
  double gap_estimate = 0.0;
  bool converged = false;
  bool is_principal_eigenvalue = false;
  std::string principal_reason;
  double cw_lower = 0.0;  // Collatz-Wielandt bracket mapped to s-units
  double cw_upper = 0.0;
  double clipped_magnitude = 0.0;
  Stepper stepper_used = Stepper::CrankNicolson;
  int steps_used = 0;
};

// Power iteration on the period map of a generic system, with autonomous
// substep refinement. Eigenfunction samples are stored on the base time grid.
SpectralResult system_spectral_bound(const LinearPeriodicSystem& sys,
                                     const SteppingOptions& opts = {});

SpectralResult spectral_bound(const OperatorSpec& spec, const SteppingOptions& opts = {});
SpectralResult adjoint_spectral_bound(const OperatorSpec& spec, const SteppingOptions& opts = {});

struct LambdaAProfile {
  Eigen::VectorXd lambda;                // per node
  std::vector<Eigen::MatrixXd> eigfun;   // [node] l x (steps+1), positive
  std::vector<Eigen::MatrixXd> adjoint;  // [node] l x (steps+1)
  Eigen::VectorXd residual;              // per node, of the periodic ODE
  double max_lambda = 0.0;
  int argmax = 0;
};

// Principal eigenvalue of -tau phi' + A(x,t) phi = lambda phi per node.
LambdaAProfile lambda_A_profile(const MatrixField& A, double tau, const SpatialGrid& grid,
                                const TimeGrid& tg, int substeps = 0);

// A - diag(outflow): the multiplication part of the operator (the N in L = M + N).
MatrixField local_part_field(const OperatorSpec& spec);

// M[phi] = D P[phi] (inflow only), per knot.
StateField apply_M(const OperatorSpec& spec, const StateField& phi);

struct ExistenceReport {
  double s = 0.0;
  double s_N = 0.0;  // max_x lambda_A(x)
  bool criterion_i = false;
  bool criterion_ii = false;
  double alpha_witness = 0.0;
  double r_at_witness = 0.0;
  bool nonintegrable_flag = false;
  double contact_exponent = 0.0;
  bool flat_profile = false;
  bool simplicity = false;
  bool is_principal_eigenvalue = false;
  std::string reason;
};

ExistenceReport existence_criteria(const OperatorSpec& spec, const SteppingOptions& opts = {});

// Contact-exponent fit of max lambda - lambda(x) near the argmax; a proxy for
// non-integrability of 1/(max lambda - lambda), which forces a principal eigenvalue.
struct ContactFit {
  double exponent = 0.0;
  bool flat = false;
  bool flag = false;  // non-integrability proxy verdict
  int points_used = 0;
};
ContactFit contact_exponent_fit(const Eigen::VectorXd& lambda, const SpatialGrid& grid);

// Spectral abscissa of the frozen-time dense matrix via a shifted power iteration.
double frozen_time_bound(const OperatorSpec& spec, double t);

}  // namespace nls
