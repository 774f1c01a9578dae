#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nls/floquet.hpp"
#include "nls/local_limit.hpp"
#include "nls/operator_core.hpp"

namespace nls {

using ScalarFn = std::function<double(const Point&, double)>;

// Zika system (hosts H_i, uninfected vectors V_u, infected vectors V_i).
struct ZikaParams {
  std::function<double(const Point&)> H_u;
  ScalarFn rho, sigma1, sigma2, beta, mu;
  ScalarFn d1, d2;
  KernelSet kernels;  // two unit-sigma kernels: species 1 = hosts, species 2 = vectors
  double sigma = 1.0;
  double m = 0.0;
  double tau = 1.0;
  SpatialGrid grid;
  TimeGrid time;
};

// Multigenotype stem cell system.
struct StemCellParams {
  int l = 1;
  Eigen::MatrixXd c;  // coupling c_ij >= 0
  std::vector<ScalarFn> beta;
  std::vector<ScalarFn> kappa;
  KernelSet kernels;
  double n_exp = 0.0;  // removal exponent, 0 or > 1
  double tau = 1.0;
  SpatialGrid grid;
  TimeGrid time;
};

struct Trajectory {
  std::vector<Eigen::VectorXd> period_states;  // states at integer times 0..periods
  std::vector<Eigen::VectorXd> last_period;    // knots of the final period
  std::vector<Eigen::VectorXd> prev_period;
  double periodic_residual = 0.0;  // sup over knots of |u(t+1) - u(t)|
  double clipped = 0.0;
  int periods = 0;
  bool reached_periodic = false;
  bool blowup = false;
  std::string diagnosis;
};

// Semilinear system integrated by Strang-like splitting: implicit (CN) linear
// dispersal half-steps around an explicit Heun reaction step.
struct SplitSystem {
  std::function<Eigen::MatrixXd(double)> linear;
  bool linear_time_independent = false;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> reaction;
  double tau = 1.0;
  int size = 0;
  int steps_per_period = 0;
};

Trajectory integrate_split(const SplitSystem& sys, const Eigen::VectorXd& u0, int max_periods,
                           double periodic_tol = 1e-7, double blowup_guard = 1e12,
                           double stop_norm = 0.0);

// Full Zika system as a split system; state per node is (H_i, V_u, V_i).
SplitSystem zika_system(const ZikaParams& zp);
// The (H_i, V_i) comparison subsystem with V bounds frozen at V_star -+ eps and
// the exact positive part (V_star + eps - V_i)^+.
SplitSystem zika_comparison_system(const ZikaParams& zp, const StateField& V_star, double eps);
SplitSystem stemcell_system(const StemCellParams& sp);

Trajectory integrate_system(const ZikaParams& zp, const Eigen::VectorXd& u0, int periods);
Trajectory integrate_system(const StemCellParams& sp, const Eigen::VectorXd& u0, int periods);

// Linearized threshold operators.
OperatorSpec zika_L0_spec(const ZikaParams& zp);
OperatorSpec zika_L1_spec(const ZikaParams& zp, const StateField& V_star);
OperatorSpec stemcell_Ln_spec(const StemCellParams& sp);

struct ZikaThresholds {
  double s_L0 = 0.0;
  bool has_V_star = false;
  StateField V_star;
  double s_L1 = 0.0;
  bool s_L1_defined = false;
};

ZikaThresholds zika_thresholds(const ZikaParams& zp, const SteppingOptions& opts = {});

enum class ZikaVerdict { Endemic, VectorOnly, Extinction, Inconclusive };

struct ZikaClassification {
  ZikaVerdict verdict = ZikaVerdict::Inconclusive;
  std::string verdict_name;
  ZikaThresholds thresholds;
  double evidence = 0.0;  // final-period distance / norm per the regime
  std::string evidence_note;
  int periods_run = 0;
  StateField final_period;
};

ZikaClassification classify_zika(const ZikaParams& zp, const Eigen::VectorXd& u0, int periods,
                                 const SteppingOptions& opts = {});

enum class StemVerdict { Growth, Neutral, Decay, Persist, Extinction, Inconclusive };

struct StemCellClassification {
  StemVerdict verdict = StemVerdict::Inconclusive;
  std::string verdict_name;
  double s = 0.0;
  double evidence = 0.0;
  std::string evidence_note;
  double rate_fit = 0.0;       // decay case: per-period log rate
  double c_pairing = 0.0;      // neutral case: <Q0,psi> / <phi0,psi>
  StateField attractor;        // persist case
  bool has_attractor = false;
  int periods_run = 0;
  StateField final_period;
};

StemCellClassification classify_stemcell(const StemCellParams& sp, const Eigen::VectorXd& Q0,
                                         int periods, const SteppingOptions& opts = {});

// Convergence check: scalar linear nonlocal IVP vs the local FD solution.
struct LinearIVP {
  ScalarFn d;   // dispersal rate
  ScalarFn a;   // reaction coefficient (f = a u)
  KernelSet kernels;  // unit sigma, symmetric, compact
  std::function<double(const Point&)> u0;  // smooth, vanishing on the boundary
  double tau = 1.0;
  SpatialGrid grid;
  TimeGrid time;
};

struct IvpErrorRow {
  double sigma = 0.0;
  double sup_error = 0.0;
};

struct IvpErrorTable {
  std::vector<IvpErrorRow> rows;
  double fitted_exponent = 0.0;
  bool strictly_decreasing = false;
};

IvpErrorTable nonlocal_to_local_ivp_error(const LinearIVP& ivp,
                                          const std::vector<double>& sigmas, double T);

}  // namespace nls
