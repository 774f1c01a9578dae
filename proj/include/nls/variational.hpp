#pragma once

#include <Eigen/Dense>
#include <string>

#include "nls/floquet.hpp"
#include "nls/operator_core.hpp"

namespace nls {

struct RatioWitness {
  int knot = 0;
  int node = 0;
  int species = 0;
};

struct VariationalCertificate {
  double lower_bound = 0.0;  // inf of L_i[phi]/phi_i, a lambda_p lower certificate
  double upper_bound = 0.0;  // sup of same, a lambda_p' upper certificate
  RatioWitness witness_lower;
  RatioWitness witness_upper;
  double derivative_truncation = 0.0;  // reported discretization allowance
};

// Per-sample ratios of the full operator (including -tau d/dt via 4th order
// periodic differences) against a strictly positive periodic test function.
VariationalCertificate rayleigh_bounds(const OperatorSpec& spec, const StateField& phi);

struct EqualityReport {
  double lambda_p_est = 0.0;
  double lambda_p_prime_est = 0.0;
  double s = 0.0;
  double max_gap = 0.0;
  bool used_approximation = false;
  int levels_used = 0;
  bool certified = false;
  std::string note;
};

// Certifies the equality s(L) = lambda_p = lambda_p'. Uses the principal
// eigenfunction directly when it is strictly positive, otherwise certifies
// through the approximation levels.
EqualityReport certify_equality(const OperatorSpec& spec, double tol,
                                const SteppingOptions& opts = {});

}  // namespace nls
