#include "nls/asymptotics.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

namespace nls {

namespace {

void run_points(int count, int workers, const std::function<void(int)>& work) {
  if (workers <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) work(i);
    return;
  }
  int nt = std::min(workers, count);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int w = 0; w < nt; ++w)
    pool.emplace_back([=]() {
      for (int i = w; i < count; i += nt) work(i);
    });
  for (auto& th : pool) th.join();
}

// Aitken delta-squared from the last three points.
double extrapolate(const std::vector<SweepRow>& rows) {
  std::vector<double> s;
  for (const auto& r : rows)
    if (!r.refused) s.push_back(r.s);
  if (s.empty()) return 0.0;
  if (s.size() < 3) return s.back();
  double s1 = s[s.size() - 3], s2 = s[s.size() - 2], s3 = s.back();
  double denom = (s3 - s2) - (s2 - s1);
  if (std::abs(denom) < 1e-300) return s3;
  return s3 - (s3 - s2) * (s3 - s2) / denom;
}

int count_violations(const std::vector<SweepRow>& rows, bool nonincreasing, double tol) {
  int v = 0;
  const SweepRow* prev = nullptr;
  for (const auto& r : rows) {
    if (r.refused) continue;
    if (prev) {
      if (nonincreasing && r.s > prev->s + tol) ++v;
      if (!nonincreasing && r.s < prev->s - tol) ++v;
    }
    prev = &r;
  }
  return v;
}

}  // namespace

SweepResult sweep_dispersal_rate(const OperatorSpec& base, const std::vector<double>& scales,
                                 const SteppingOptions& opts, int workers) {
  SweepResult res;
  res.parameter = "d_scale";
  res.rows.resize(scales.size());

  run_points(static_cast<int>(scales.size()), workers, [&](int i) {
    SweepRow row;
    row.param = scales[i];
    try {
      OperatorSpec spec = base.with_D_scale(scales[i]);
      SpectralResult sb = spectral_bound(spec, opts);
      row.s = sb.s;
      row.residual = sb.residual;
      row.iters = sb.power_iters;
      row.converged = sb.converged;
    } catch (const std::exception& e) {
      row.refused = true;
      row.note = e.what();
    }
    res.rows[i] = row;
  });

  LambdaAProfile prof = lambda_A_profile(base.A, base.tau, base.grid, base.time);
  res.predicted_limit = prof.max_lambda;
  res.provenance = "small-rate limit: max_x lambda_A(x)";
  res.extrapolated = extrapolate(res.rows);
  for (auto it = res.rows.rbegin(); it != res.rows.rend(); ++it)
    if (!it->refused) {
      res.target_gap = std::abs(it->s - res.predicted_limit);
      break;
    }
  res.monotonicity_violations = count_violations(res.rows, true, 1e-7);
  return res;
}

SweepResult sweep_dispersal_range(const OperatorSpec& base, const std::vector<double>& sigmas,
                                  double m, const SteppingOptions& opts, int workers) {
  if (base.form != CouplingForm::Scaled)
    throw std::invalid_argument("sweep_dispersal_range: scaled-form spec required");
  double hmax = base.grid.h[0];
  if (base.grid.dim == 2) hmax = std::max(hmax, base.grid.h[1]);
  for (double s : sigmas)
    for (const auto& ker : base.kernels.kernels)
      if (ker.support_radius * s < 2.0 * hmax)
        throw std::invalid_argument(
            "sweep_dispersal_range: kernel support below 2 grid cells at sigma=" +
            std::to_string(s) + "; refine the grid");

  SweepResult res;
  res.parameter = "sigma";
  res.rows.resize(sigmas.size());

  run_points(static_cast<int>(sigmas.size()), workers, [&](int i) {
    SweepRow row;
    row.param = sigmas[i];
    try {
      OperatorSpec spec = base;
      spec.sigma = sigmas[i];
      spec.m = m;
      spec.kernels = rescale_kernel(base.kernels, sigmas[i]);
      spec.prepare();
      SpectralResult sb = spectral_bound(spec, opts);
      row.s = sb.s;
      row.residual = sb.residual;
      row.iters = sb.power_iters;
      row.converged = sb.converged;
    } catch (const std::exception& e) {
      row.refused = true;
      row.note = e.what();
    }
    res.rows[i] = row;
  });

  bool to_infinity = sigmas.size() >= 2 && sigmas.back() > sigmas.front();
  if (to_infinity) {
    if (m == 0.0) {
      LambdaAProfile prof =
          lambda_A_profile(local_part_field(base), base.tau, base.grid, base.time);
      res.predicted_limit = prof.max_lambda;
      res.provenance = "large-range limit, m = 0: max_x lambda_{A0}(x)";
    } else {
      LambdaAProfile prof = lambda_A_profile(base.A, base.tau, base.grid, base.time);
      res.predicted_limit = prof.max_lambda;
      res.provenance = "large-range limit, m > 0: max_x lambda_A(x)";
    }
  } else if (m == 2.0) {
    LocalProblem lp = local_problem_from_spec(base);
    res.predicted_limit = local_principal_eigen(lp, opts).s;
    res.provenance = "small-range limit, m = 2: lambda_local";
  } else {
    LambdaAProfile prof = lambda_A_profile(base.A, base.tau, base.grid, base.time);
    res.predicted_limit = prof.max_lambda;
    res.provenance = "small-range limit, m in [0,2): max_x lambda_A(x)";
  }

  res.extrapolated = extrapolate(res.rows);
  for (auto it = res.rows.rbegin(); it != res.rows.rend(); ++it)
    if (!it->refused) {
      res.target_gap = std::abs(it->s - res.predicted_limit);
      break;
    }
  res.monotonicity_violations = 0;
  return res;
}

double frozen_bound_average(const OperatorSpec& spec, int points) {
  if (points < 3 || points % 2 == 0)
    throw std::invalid_argument("frozen_bound_average: need an odd point count >= 3");
  double h = 1.0 / (points - 1);
  double acc = 0.0;
  for (int j = 0; j < points; ++j) {
    double w = (j == 0 || j == points - 1) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
    acc += w * frozen_time_bound(spec, j * h);
  }
  return acc * h / 3.0;
}

double frequency_lower_bound_constant(const OperatorSpec& spec) {
  int n = spec.grid.n();
  int steps = spec.time.steps;
  double vol = spec.grid.bounds.volume();
  const Kernel& ker = spec.kernels.kernels[0];

  double kk = 0.0;
  for (int k = 0; k < steps; ++k) {
    double acc = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        acc += spec.grid.weights[p] * spec.grid.weights[q] *
               ker(spec.grid.nodes[p], spec.grid.nodes[q], spec.time.knots[k]);
    kk += acc / steps;
  }
  kk /= vol;

  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < spec.l; ++i) {
    double h_i = spec.outflow(0, 0.0)[i];
    double a_avg = 0.0;
    for (int k = 0; k < steps; ++k)
      for (int p = 0; p < n; ++p)
        a_avg += spec.grid.weights[p] * spec.A.values[k][p](i, i) / steps;
    a_avg /= vol;
    best = std::min(best, h_i * (kk - 1.0) + a_avg);
  }
  return best;
}

SweepResult sweep_frequency(const OperatorSpec& base, const std::vector<double>& taus,
                            const std::function<double(double)>& d_of_tau,
                            const SteppingOptions& opts, int workers) {
  auto dmul = d_of_tau ? d_of_tau : [](double) { return 1.0; };

  // sampled monotonicity preconditions: d' >= 0 and (d/tau)' <= 0
  for (std::size_t i = 1; i < taus.size(); ++i) {
    double t0 = std::min(taus[i - 1], taus[i]), t1 = std::max(taus[i - 1], taus[i]);
    if (dmul(t1) < dmul(t0) - 1e-12)
      throw std::invalid_argument("sweep_frequency: d_of_tau must be nondecreasing");
    if (dmul(t1) / t1 > dmul(t0) / t0 + 1e-12)
      throw std::invalid_argument("sweep_frequency: d_of_tau/tau must be nonincreasing");
  }

  SweepResult res;
  res.parameter = "tau";
  res.rows.resize(taus.size());

  run_points(static_cast<int>(taus.size()), workers, [&](int i) {
    SweepRow row;
    row.param = taus[i];
    try {
      OperatorSpec spec = base.with_D_scale(dmul(taus[i]));
      spec.tau = taus[i];
      spec.prepare();
      SpectralResult sb = spectral_bound(spec, opts);
      row.s = sb.s;
      row.residual = sb.residual;
      row.iters = sb.power_iters;
      row.converged = sb.converged;
    } catch (const std::exception& e) {
      row.refused = true;
      row.note = e.what();
    }
    res.rows[i] = row;
  });

  res.monotonicity_violations = count_violations(res.rows, true, 1e-7);

  double tau_small = taus.front();
  for (double t : taus) tau_small = std::min(tau_small, t);
  OperatorSpec frozen_spec = base.with_D_scale(dmul(tau_small * 1e-3));
  res.frozen_average = frozen_bound_average(frozen_spec, 41);
  res.predicted_limit = res.frozen_average;
  res.provenance = "small-frequency limit: integral of s(N1(t)) dt";

  double tau_big = taus.front();
  for (double t : taus) tau_big = std::max(tau_big, t);
  OperatorSpec inf_spec = base.with_D_scale(dmul(tau_big * 1e3));
  res.lower_bound_constant = frequency_lower_bound_constant(inf_spec);

  res.extrapolated = extrapolate(res.rows);
  for (auto it = res.rows.rbegin(); it != res.rows.rend(); ++it)
    if (!it->refused) {
      res.target_gap = std::abs(it->s - res.predicted_limit);
      break;
    }
  return res;
}

}  // namespace nls
