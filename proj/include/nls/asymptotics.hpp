#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nls/floquet.hpp"
#include "nls/local_limit.hpp"
#include "nls/operator_core.hpp"

namespace nls {

struct SweepRow {
  double param = 0.0;
  double s = 0.0;
  double residual = 0.0;
  int iters = 0;
  bool converged = false;
  bool refused = false;  // stiffness / resolution refusal, point skipped
  std::string note;
};

struct SweepResult {
  std::string parameter;
  std::vector<SweepRow> rows;
  double predicted_limit = 0.0;
  std::string provenance;
  double extrapolated = 0.0;
  double target_gap = 0.0;  // |last point - predicted_limit|
  int monotonicity_violations = 0;
  double lower_bound_constant = 0.0;  // frequency sweep: large-tau lower bound
  double frozen_average = 0.0;        // frequency sweep: average of frozen bounds
};

// Dispersal-rate sweep: scale multiplies the rate field d (and with it D = C D0).
SweepResult sweep_dispersal_rate(const OperatorSpec& base, const std::vector<double>& scales,
                                 const SteppingOptions& opts = {}, int workers = 1);

// Dispersal-range sweep: base holds unit-sigma kernels; each point re-scales them. The
// m = 2 decreasing branch is compared against the local Dirichlet eigenvalue.
SweepResult sweep_dispersal_range(const OperatorSpec& base, const std::vector<double>& sigmas,
                                  double m, const SteppingOptions& opts = {}, int workers = 1);

// Frequency sweep: s(tau) with an optional tau-dependent rate multiplier.
SweepResult sweep_frequency(const OperatorSpec& base, const std::vector<double>& taus,
                            const std::function<double(double)>& d_of_tau = nullptr,
                            const SteppingOptions& opts = {}, int workers = 1);

// Composite-Simpson average over the period of the frozen-time spectral bound.
double frozen_bound_average(const OperatorSpec& spec, int points = 41);

// min_i { h_ii (|Omega|^{-1} int int int k dy dx dt - 1) + |Omega|^{-1} int int a_ii }.
double frequency_lower_bound_constant(const OperatorSpec& spec);

}  // namespace nls
