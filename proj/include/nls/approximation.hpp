#pragma once

#include <Eigen/Dense>
#include <vector>

#include "nls/fields.hpp"
#include "nls/floquet.hpp"
#include "nls/grid.hpp"
#include "nls/operator_core.hpp"

namespace nls {

// smooth transition chi(s) = exp(-1/s) for s > 0
double smooth_chi(double s);
// smooth step: 0 for s <= 0, 1 for s >= 1
double smooth_step(double s);
// smooth positive part Phi(s) = s * smooth_step(s)
double smooth_pospart(double s);

struct MollifierSpec {
  double epsilon = 0.1;
  double C1 = 0.0;  // time bump normalization, int eta = 1
  double C2 = 0.0;  // space bump normalization, int phi = 1
};

MollifierSpec make_mollifier(double epsilon, int dim);

struct MollifyResult {
  MatrixField field;
  Eigen::MatrixXd delta;  // per-entry sup error ||b_ij - a_ij||
  double delta_max = 0.0;
};

// Space-time mollification with periodized time bump and constant (nearest
// node) extension beyond Omega. Stencil rows are normalized to unit mass, so
// constants are reproduced exactly and entrywise order is preserved.
MollifyResult mollify_periodic(const MatrixField& field, double epsilon,
                               const SpatialGrid& grid, const TimeGrid& tg);

struct ApproxLevel {
  double epsilon = 0.0;
  double r = 0.0;                  // flattening radius actually used
  MatrixField A_lower;             // A^k_- (before flattening)
  MatrixField A_lower_flat;        // A~^k_- (after flatten_at_max)
  MatrixField A_upper;             // A^k_+
  Eigen::MatrixXd delta;           // mollification errors delta^k_ij
  double delta_max = 0.0;
  Eigen::VectorXd beta;            // per-node diagonal shift of the flattening
  Eigen::VectorXd lambda_lower;    // lambda_{A^k_-} profile
  Eigen::VectorXd lambda_flat;     // flattened profile
  int argmax = 0;
  int gamma_halvings = 0;          // re-mollification halvings used in step 2
};

struct ApproxSequence {
  std::vector<ApproxLevel> levels;
};

// Smooth lower/upper approximating sequences (no flattening yet).
ApproxSequence lower_upper_sequences(const MatrixField& A, int n_levels,
                                     const SpatialGrid& grid, const TimeGrid& tg,
                                     double eps0 = 0.1);

struct FlattenResult {
  MatrixField A_tilde;
  Eigen::VectorXd beta;
  Eigen::VectorXd lambda_orig;
  Eigen::VectorXd lambda_flat;
  double r_used = 0.0;
  int argmax = 0;
};

// Flattening step: shift A^k_- by beta(x) I so the lambda_A profile is
// constant on a ball around the argmax and no larger than max - eps elsewhere.
FlattenResult flatten_at_max(const MatrixField& A_minus, double eps_k, double r_k, double tau,
                             const SpatialGrid& grid, const TimeGrid& tg);

struct SandwichRow {
  int level = 0;
  double epsilon = 0.0;
  double delta_max = 0.0;
  double s_lower = 0.0;
  double s_mid = 0.0;
  double s_upper = 0.0;
  double gap = 0.0;
  bool nonintegrable_flag = false;
};

struct SandwichTable {
  std::vector<SandwichRow> rows;
  bool sandwich_ok = true;       // s_lower <= s_mid <= s_upper within 1e-7, all rows
  bool gaps_shrinking = true;
  ApproxSequence sequence;
};

// Full sandwich check on the operator's local part.
SandwichTable sandwich_check(const OperatorSpec& spec, int n_levels, double eps0 = 0.1,
                             const SteppingOptions& opts = {});

// Replace the local multiplication part of the spec (A - outflow) by B.
OperatorSpec spec_with_local_part(const OperatorSpec& spec, const MatrixField& B);

}  // namespace nls
