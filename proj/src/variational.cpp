#include "nls/variational.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "nls/approximation.hpp"

namespace nls {

VariationalCertificate rayleigh_bounds(const OperatorSpec& spec, const StateField& phi) {
  int steps = spec.time.steps;
  if (phi.knots() != steps + 1)
    throw std::invalid_argument("rayleigh_bounds: phi must be sampled at all time knots");
  for (const auto& u : phi.u)
    if (u.minCoeff() <= 0.0)
      throw std::invalid_argument("rayleigh_bounds: test function must be strictly positive");

  double dt = spec.time.dt;
  int n = spec.grid.n();
  int l = spec.l;
  auto wrap = [steps](int i) { return ((i % steps) + steps) % steps; };

  VariationalCertificate cert;
  cert.lower_bound = std::numeric_limits<double>::infinity();
  cert.upper_bound = -std::numeric_limits<double>::infinity();

  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXd d4 = (phi.u[wrap(k - 2)] - 8.0 * phi.u[wrap(k - 1)] +
                          8.0 * phi.u[wrap(k + 1)] - phi.u[wrap(k + 2)]) /
                         (12.0 * dt);
    Eigen::VectorXd d2 = (phi.u[wrap(k + 1)] - phi.u[wrap(k - 1)]) / (2.0 * dt);
    cert.derivative_truncation =
        std::max(cert.derivative_truncation,
                 spec.tau * (d4 - d2).cwiseAbs().maxCoeff() / phi.u[k].minCoeff());
    Eigen::VectorXd lphi =
        -spec.tau * d4 + apply_spatial(spec, phi.u[k], spec.time.knots[k]);
    for (int p = 0; p < n; ++p)
      for (int i = 0; i < l; ++i) {
        double ratio = lphi[p * l + i] / phi.u[k][p * l + i];
        if (ratio < cert.lower_bound) {
          cert.lower_bound = ratio;
          cert.witness_lower = {k, p, i};
        }
        if (ratio > cert.upper_bound) {
          cert.upper_bound = ratio;
          cert.witness_upper = {k, p, i};
        }
      }
  }
  return cert;
}

EqualityReport certify_equality(const OperatorSpec& spec, double tol,
                                const SteppingOptions& opts) {
  EqualityReport rep;
  SpectralResult sb = spectral_bound(spec, opts);
  rep.s = sb.s;

  double fmin = std::numeric_limits<double>::infinity();
  for (const auto& u : sb.eigenfunction.u) fmin = std::min(fmin, u.minCoeff());

  if (fmin > 0.0 && sb.residual <= 1e-6) {
    VariationalCertificate cert = rayleigh_bounds(spec, sb.eigenfunction);
    rep.lambda_p_est = cert.lower_bound;
    rep.lambda_p_prime_est = cert.upper_bound;
    rep.max_gap = std::max(std::abs(rep.lambda_p_est - sb.s),
                           std::abs(rep.lambda_p_prime_est - sb.s));
    rep.certified = rep.max_gap <= tol;
    rep.note = "certified from the principal eigenfunction";
    return rep;
  }

  // eigenfunction not strictly positive: certify through approximation levels
  rep.used_approximation = true;
  int n_levels = 4;
  rep.levels_used = n_levels;
  MatrixField B = local_part_field(spec);
  ApproxSequence seq = lower_upper_sequences(B, n_levels, spec.grid, spec.time);

  rep.lambda_p_est = -std::numeric_limits<double>::infinity();
  rep.lambda_p_prime_est = std::numeric_limits<double>::infinity();
  for (auto& level : seq.levels) {
    FlattenResult fl = flatten_at_max(level.A_lower, level.epsilon, level.epsilon, spec.tau,
                                      spec.grid, spec.time);
    OperatorSpec lo = spec_with_local_part(spec, fl.A_tilde);
    OperatorSpec hi = spec_with_local_part(spec, level.A_upper);
    SpectralResult sl = spectral_bound(lo, opts);
    SpectralResult sh = spectral_bound(hi, opts);
    double lmin = std::numeric_limits<double>::infinity();
    for (const auto& u : sl.eigenfunction.u) lmin = std::min(lmin, u.minCoeff());
    double hmin = std::numeric_limits<double>::infinity();
    for (const auto& u : sh.eigenfunction.u) hmin = std::min(hmin, u.minCoeff());
    // ratios of the *original* operator against the approximants' eigenfunctions
    if (lmin > 0.0) {
      VariationalCertificate c = rayleigh_bounds(spec, sl.eigenfunction);
      rep.lambda_p_est = std::max(rep.lambda_p_est, c.lower_bound);
    }
    if (hmin > 0.0) {
      VariationalCertificate c = rayleigh_bounds(spec, sh.eigenfunction);
      rep.lambda_p_prime_est = std::min(rep.lambda_p_prime_est, c.upper_bound);
    }
  }
  rep.max_gap = std::max(std::abs(rep.lambda_p_est - rep.s),
                         std::abs(rep.lambda_p_prime_est - rep.s));
  rep.certified = std::isfinite(rep.max_gap) && rep.max_gap <= tol;
  rep.note = "certified via approximation levels";
  return rep;
}

}  // namespace nls
