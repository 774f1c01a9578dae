#include "nls/floquet.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nls {

LinearPeriodicSystem system_of(const OperatorSpec& spec) {
  LinearPeriodicSystem sys;
  sys.assemble = [&spec](double t) {
    return assemble_dense(spec, t, std::numeric_limits<int>::max());
  };
  sys.tau = spec.tau;
  sys.size = spec.size();
  sys.autonomous = spec.autonomous();
  sys.base_steps = spec.time.steps;
  return sys;
}

namespace {

double estimate_gnorm(const LinearPeriodicSystem& sys) {
  double g = sys.assemble(0.0).cwiseAbs().rowwise().sum().maxCoeff();
  if (!sys.autonomous) {
    g = std::max(g, sys.assemble(1.0 / 3.0).cwiseAbs().rowwise().sum().maxCoeff());
    g = std::max(g, sys.assemble(2.0 / 3.0).cwiseAbs().rowwise().sum().maxCoeff());
  }
  return g;
}

struct StepPlan {
  Stepper stepper;
  int substeps;
  bool autonomous;
  double gnorm;
};

StepPlan plan_stepping(const LinearPeriodicSystem& sys, const SteppingOptions& opts) {
  StepPlan plan;
  plan.autonomous = sys.autonomous;
  plan.gnorm = estimate_gnorm(sys);
  int S = opts.substeps > 0 ? opts.substeps : sys.base_steps;
  Stepper st = opts.stepper;
  if (st == Stepper::Auto)
    st = (plan.gnorm / (S * sys.tau) > 1.0) ? Stepper::CrankNicolson : Stepper::RK4;
  // RK4 needs dt ||G|| / tau of order one for stability. CN is A-stable but
  // its stability function tends to -1 for very stiff modes, which would let
  // scheme artifacts outgrow the Perron mode; keep c ||G|| below ~0.55 so the
  // mode ordering of the continuum flow is preserved.
  if (st == Stepper::RK4)
    S = std::max(S, static_cast<int>(std::ceil(plan.gnorm / sys.tau)));
  else
    S = std::max(S, static_cast<int>(std::ceil(0.55 * plan.gnorm / sys.tau)));
  if (!plan.autonomous && sys.base_steps > 0) {
    int base = sys.base_steps;
    S = ((S + base - 1) / base) * base;  // knot-aligned
  }
  plan.stepper = st;
  plan.substeps = S;
  return plan;
}

void renorm(Eigen::MatrixXd& M, double& log_scale) {
  double m = M.cwiseAbs().maxCoeff();
  if (m > 0.0 && (m > 1e100 || m < 1e-100)) {
    M /= m;
    log_scale += std::log(m);
  }
}

// T^S with scale tracking.
void powmat(Eigen::MatrixXd base, double log_base, long long S, Eigen::MatrixXd& out,
            double& log_out) {
  int n = static_cast<int>(base.rows());
  out = Eigen::MatrixXd::Identity(n, n);
  log_out = 0.0;
  while (S > 0) {
    if (S & 1) {
      out = out * base;
      log_out += log_base;
      renorm(out, log_out);
    }
    S >>= 1;
    if (S) {
      base = base * base;
      log_base += log_base;
      renorm(base, log_base);
    }
  }
}

Eigen::MatrixXd cn_step_matrix(const Eigen::MatrixXd& G, double c) {
  int n = static_cast<int>(G.rows());
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  return (I - c * G).partialPivLu().solve(I + c * G);
}

Eigen::MatrixXd rk4_step_matrix(const Eigen::MatrixXd& G, double dt_over_tau) {
  int n = static_cast<int>(G.rows());
  Eigen::MatrixXd Z = dt_over_tau * G;
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd T = I + 0.25 * Z;
  T = I + (Z * T) / 3.0;
  T = I + 0.5 * (Z * T);
  T = I + Z * T;
  return T;
}

Monodromy build_monodromy_planned(const LinearPeriodicSystem& sys, const StepPlan& plan,
                                  const SteppingOptions& opts) {
  int S = plan.substeps;
  double dt = 1.0 / S;
  double c = dt / (2.0 * sys.tau);
  int n = sys.size;

  Monodromy mono;
  mono.stepper_used = plan.stepper;
  mono.steps_used = S;

  if (plan.autonomous) {
    Eigen::MatrixXd G = sys.assemble(0.0);
    Eigen::MatrixXd T = plan.stepper == Stepper::CrankNicolson
                            ? cn_step_matrix(G, c)
                            : rk4_step_matrix(G, dt / sys.tau);
    powmat(std::move(T), 0.0, S, mono.M, mono.log_scale);
  } else {
    mono.M = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd Gk = sys.assemble(0.0);
    for (int k = 0; k < S; ++k) {
      double t = k * dt;
      if (plan.stepper == Stepper::CrankNicolson) {
        Eigen::MatrixXd Gk1 = sys.assemble(t + dt);
        Eigen::MatrixXd rhs = mono.M + c * (Gk * mono.M);
        mono.M = (Eigen::MatrixXd::Identity(n, n) - c * Gk1).partialPivLu().solve(rhs);
        Gk = std::move(Gk1);
      } else {
        Eigen::MatrixXd Gm = sys.assemble(t + 0.5 * dt);
        Eigen::MatrixXd Gk1 = sys.assemble(t + dt);
        double r = 1.0 / sys.tau;
        Eigen::MatrixXd K1 = r * (Gk * mono.M);
        Eigen::MatrixXd K2 = r * (Gm * (mono.M + 0.5 * dt * K1));
        Eigen::MatrixXd K3 = r * (Gm * (mono.M + 0.5 * dt * K2));
        Eigen::MatrixXd K4 = r * (Gk1 * (mono.M + dt * K3));
        mono.M += (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
        Gk = std::move(Gk1);
      }
      renorm(mono.M, mono.log_scale);
    }
  }

  if (!mono.M.allFinite())
    throw std::runtime_error("build_monodromy: non-finite period map (stiffness)");

  // final normalization plus removal of scheme-level negative undershoot
  double m = mono.M.cwiseAbs().maxCoeff();
  if (m > 0.0) {
    mono.M /= m;
    mono.log_scale += std::log(m);
  }
  for (Eigen::Index j = 0; j < mono.M.cols(); ++j)
    for (Eigen::Index i = 0; i < mono.M.rows(); ++i) {
      double v = mono.M(i, j);
      if (v < 0.0 && v >= -opts.clip_tol) {
        mono.clipped_magnitude += -v;
        mono.M(i, j) = 0.0;
      }
    }
  return mono;
}

}  // namespace

Monodromy build_monodromy(const LinearPeriodicSystem& sys, const SteppingOptions& opts) {
  return build_monodromy_planned(sys, plan_stepping(sys, opts), opts);
}

Monodromy build_monodromy(const OperatorSpec& spec, const SteppingOptions& opts) {
  return build_monodromy(system_of(spec), opts);
}

namespace {

Eigen::MatrixXd propagate_block(const LinearPeriodicSystem& sys, Eigen::MatrixXd V,
                                const StepPlan& plan, double norm_guard, double clip_tol) {
  int S = plan.substeps;
  double dt = 1.0 / S;
  double c = dt / (2.0 * sys.tau);
  int n = sys.size;

  auto guard_and_clip = [&](Eigen::MatrixXd& X) {
    if (!X.allFinite() || X.cwiseAbs().maxCoeff() > norm_guard)
      throw std::runtime_error(
          "period_map_apply: norm blowup beyond 1e12 (stiff regime; use the scaled "
          "monodromy route)");
    double floor = -clip_tol * X.cwiseAbs().maxCoeff();
    for (Eigen::Index jj = 0; jj < X.cols(); ++jj)
      for (Eigen::Index ii = 0; ii < X.rows(); ++ii)
        if (X(ii, jj) < 0.0 && X(ii, jj) >= floor) X(ii, jj) = 0.0;
  };

  if (plan.autonomous) {
    Eigen::MatrixXd G = sys.assemble(0.0);
    if (plan.stepper == Stepper::CrankNicolson) {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(n, n) - c * G);
      for (int k = 0; k < S; ++k) {
        V = lu.solve(V + c * (G * V));
        guard_and_clip(V);
      }
    } else {
      Eigen::MatrixXd T = rk4_step_matrix(G, dt / sys.tau);
      for (int k = 0; k < S; ++k) {
        V = T * V;
        guard_and_clip(V);
      }
    }
    return V;
  }

  Eigen::MatrixXd Gk = sys.assemble(0.0);
  for (int k = 0; k < S; ++k) {
    double t = k * dt;
    if (plan.stepper == Stepper::CrankNicolson) {
      Eigen::MatrixXd Gk1 = sys.assemble(t + dt);
      Eigen::MatrixXd rhs = V + c * (Gk * V);
      V = (Eigen::MatrixXd::Identity(n, n) - c * Gk1).partialPivLu().solve(rhs);
      Gk = std::move(Gk1);
    } else {
      Eigen::MatrixXd Gm = sys.assemble(t + 0.5 * dt);
      Eigen::MatrixXd Gk1 = sys.assemble(t + dt);
      double r = 1.0 / sys.tau;
      Eigen::MatrixXd K1 = r * (Gk * V);
      Eigen::MatrixXd K2 = r * (Gm * (V + 0.5 * dt * K1));
      Eigen::MatrixXd K3 = r * (Gm * (V + 0.5 * dt * K2));
      Eigen::MatrixXd K4 = r * (Gk1 * (V + dt * K3));
      V += (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
      Gk = std::move(Gk1);
    }
    guard_and_clip(V);
  }
  return V;
}

}  // namespace

Eigen::VectorXd period_map_apply(const OperatorSpec& spec, const Eigen::VectorXd& v0,
                                 const SteppingOptions& opts) {
  if (!v0.allFinite()) throw std::invalid_argument("period_map_apply: v0 not finite");
  LinearPeriodicSystem sys = system_of(spec);
  return propagate_block(sys, v0, plan_stepping(sys, opts), 1e12, opts.clip_tol);
}

Eigen::MatrixXd period_map_apply_batch(const OperatorSpec& spec, const Eigen::MatrixXd& V0,
                                       const SteppingOptions& opts) {
  LinearPeriodicSystem sys = system_of(spec);
  return propagate_block(sys, V0, plan_stepping(sys, opts), 1e12, opts.clip_tol);
}

PowerResult power_iteration(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                            int size, double tol, int cap, bool clip_negative,
                            double vec_tol) {
  PowerResult res;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(size);
  v /= v.norm();
  double rho_prev = -1.0;
  std::vector<double> inc_hist;
  bool restarted = false;

  for (int it = 0; it < cap; ++it) {
    Eigen::VectorXd w = apply(v);
    if (clip_negative) {
      for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w[i] < 0.0) {
          res.clipped += -w[i];
          w[i] = 0.0;
        }
    }
    double rho = w.norm();
    res.iters = it + 1;
    if (rho == 0.0) {
      res.rho = 0.0;
      res.v = v;
      res.converged = true;
      return res;
    }
    double vec_resid = (w - rho * v).norm();  // v is the previous normalized iterate
    v = w / rho;
    res.rho = rho;
    res.v = v;
    if (rho_prev >= 0.0) {
      double inc = std::abs(rho - rho_prev);
      inc_hist.push_back(inc);
      if (inc <= tol * rho && vec_resid <= vec_tol * rho) {
        res.converged = true;
        break;
      }
    }
    rho_prev = rho;
    if (!restarted && it == cap / 2) {
      // deterministic restart with a perturbed positive vector
      for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = std::max(v[i], 0.0) + 0.05 * (1.0 + 0.5 * std::sin(2.7 * static_cast<double>(i) + 0.4));
      v /= v.norm();
      rho_prev = -1.0;
      restarted = true;
    }
  }

  // subdominant ratio from the tail of the increment history
  double acc = 0.0;
  int m = static_cast<int>(inc_hist.size());
  int used = 0;
  for (int i = std::max(1, m - 5); i < m; ++i) {
    if (inc_hist[i - 1] > 0.0 && inc_hist[i] > 0.0) {
      acc += std::log(inc_hist[i] / inc_hist[i - 1]);
      ++used;
    }
  }
  res.gap_estimate = used > 0 ? std::min(1.0, std::exp(acc / used)) : 0.0;
  return res;
}

double dense_spectral_radius(const Eigen::MatrixXd& M) {
  return M.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

// 4th order central difference of periodic knot samples (last knot duplicates first).
Eigen::VectorXd time_derivative4(const std::vector<Eigen::VectorXd>& u, int k, double dt) {
  int steps = static_cast<int>(u.size()) - 1;
  auto wrap = [steps](int i) { return ((i % steps) + steps) % steps; };
  return (u[wrap(k - 2)] - 8.0 * u[wrap(k - 1)] + 8.0 * u[wrap(k + 1)] - u[wrap(k + 2)]) /
         (12.0 * dt);
}

StateField reconstruct_eigenfunction(const LinearPeriodicSystem& sys, const Eigen::VectorXd& v,
                                     double s, const StepPlan& plan, double clip_tol) {
  int steps = sys.base_steps;
  StateField phi = StateField::zeros(steps + 1, sys.size);
  if (plan.autonomous) {
    Eigen::VectorXd w = v / v.cwiseAbs().maxCoeff();
    for (int k = 0; k <= steps; ++k) phi.u[k] = w;
    return phi;
  }
  int S = plan.substeps;
  int mult = S / steps;
  double dt = 1.0 / S;
  double c = dt / (2.0 * sys.tau);
  double gauge = std::exp(-s * dt / sys.tau);
  int n = sys.size;

  Eigen::VectorXd cur = v;
  phi.u[0] = cur;
  Eigen::MatrixXd Gk = sys.assemble(0.0);
  for (int k = 0; k < S; ++k) {
    double t = k * dt;
    if (plan.stepper == Stepper::CrankNicolson) {
      Eigen::MatrixXd Gk1 = sys.assemble(t + dt);
      Eigen::VectorXd rhs = cur + c * (Gk * cur);
      cur = (Eigen::MatrixXd::Identity(n, n) - c * Gk1).partialPivLu().solve(rhs);
      Gk = std::move(Gk1);
    } else {
      Eigen::MatrixXd Gm = sys.assemble(t + 0.5 * dt);
      Eigen::MatrixXd Gk1 = sys.assemble(t + dt);
      double r = 1.0 / sys.tau;
      Eigen::VectorXd K1 = r * (Gk * cur);
      Eigen::VectorXd K2 = r * (Gm * (cur + 0.5 * dt * K1));
      Eigen::VectorXd K3 = r * (Gm * (cur + 0.5 * dt * K2));
      Eigen::VectorXd K4 = r * (Gk1 * (cur + dt * K3));
      cur += (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
      Gk = std::move(Gk1);
    }
    cur *= gauge;
    double floor = -clip_tol * cur.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < cur.size(); ++i)
      if (cur[i] < 0.0 && cur[i] >= floor) cur[i] = 0.0;
    if ((k + 1) % mult == 0) phi.u[(k + 1) / mult] = cur;
  }
  double mx = 0.0;
  for (const auto& u : phi.u) mx = std::max(mx, u.cwiseAbs().maxCoeff());
  if (mx > 0.0)
    for (auto& u : phi.u) u /= mx;
  return phi;
}

}  // namespace

SpectralResult system_spectral_bound(const LinearPeriodicSystem& sys,
                                     const SteppingOptions& opts) {
  SpectralResult out;
  StepPlan plan = plan_stepping(sys, opts);
  Monodromy mono = build_monodromy_planned(sys, plan, opts);

  auto run_power = [&](const Monodromy& mn) {
    return power_iteration([&mn](const Eigen::VectorXd& x) { return (mn.M * x).eval(); },
                           sys.size, opts.power_tol, opts.power_cap, true,
                           opts.power_vec_tol);
  };
  PowerResult pr = run_power(mono);
  double s = sys.tau * (mono.log_scale + std::log(pr.rho));

  // autonomous specs: refine the substep count until the scheme bias in s is
  // below tolerance (binary powering keeps the rebuild cheap)
  if (plan.autonomous && pr.rho > 0.0 && std::isfinite(s)) {
    double tol_abs = opts.bias_rel_tol * std::max(1.0, std::abs(s));
    double g = std::abs(s) / sys.tau;
    long long S_need;
    if (mono.stepper_used == Stepper::CrankNicolson)
      S_need = static_cast<long long>(
          std::ceil(std::sqrt(g * g * g * sys.tau / (12.0 * tol_abs))));
    else
      S_need = static_cast<long long>(
          std::ceil(std::pow(std::pow(g, 5) * sys.tau / (120.0 * tol_abs), 0.25)));
    S_need = std::min<long long>(S_need, 50000000LL);
    if (S_need > mono.steps_used) {
      StepPlan plan2 = plan;
      plan2.substeps = static_cast<int>(S_need);
      mono = build_monodromy_planned(sys, plan2, opts);
      pr = run_power(mono);
      s = sys.tau * (mono.log_scale + std::log(pr.rho));
    }
  }

  out.s = s;
  out.rho = std::exp(s / sys.tau);
  out.power_iters = pr.iters;
  out.converged = pr.converged;
  out.gap_estimate = pr.gap_estimate;
  out.clipped_magnitude = pr.clipped + mono.clipped_magnitude;
  out.stepper_used = mono.stepper_used;
  out.steps_used = mono.steps_used;

  // Collatz-Wielandt bracket at the converged vector
  {
    Eigen::VectorXd w = mono.M * pr.v;
    double vmax = pr.v.cwiseAbs().maxCoeff();
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (pr.v[i] > 1e-12 * vmax) {
        lo = std::min(lo, w[i] / pr.v[i]);
        hi = std::max(hi, w[i] / pr.v[i]);
      }
    out.cw_lower = sys.tau * (mono.log_scale + std::log(std::max(lo, 1e-300)));
    out.cw_upper = sys.tau * (mono.log_scale + std::log(std::max(hi, 1e-300)));
  }

  out.eigenfunction = reconstruct_eigenfunction(sys, pr.v, s, plan, opts.clip_tol);
  return out;
}

namespace {

double eigen_residual(const OperatorSpec& spec, const StateField& phi, double s) {
  int steps = spec.time.steps;
  double dt = spec.time.dt;
  if (spec.autonomous()) {
    Eigen::VectorXd r = apply_spatial(spec, phi.u[0], 0.0) - s * phi.u[0];
    return r.cwiseAbs().maxCoeff();
  }
  double res = 0.0;
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXd lphi = -spec.tau * time_derivative4(phi.u, k, dt) +
                           apply_spatial(spec, phi.u[k], spec.time.knots[k]);
    res = std::max(res, (lphi - s * phi.u[k]).cwiseAbs().maxCoeff());
  }
  return res;
}

}  // namespace

SpectralResult spectral_bound(const OperatorSpec& spec, const SteppingOptions& opts) {
  SpectralResult out = system_spectral_bound(system_of(spec), opts);
  out.residual = eigen_residual(spec, out.eigenfunction, out.s);

  double fmin = std::numeric_limits<double>::infinity();
  for (const auto& u : out.eigenfunction.u) fmin = std::min(fmin, u.minCoeff());
  if (out.residual <= 1e-6 && fmin > 0.0) {
    out.is_principal_eigenvalue = true;
    out.principal_reason = "residual below 1e-6 with strictly positive eigenfunction";
  } else if (out.residual <= 1e-6 && fmin >= 0.0) {
    out.is_principal_eigenvalue = true;
    out.principal_reason = "residual below 1e-6 with nonnegative eigenfunction";
  } else {
    out.is_principal_eigenvalue = false;
    out.principal_reason = "spectrum point only (see existence_criteria)";
  }
  return out;
}

SpectralResult adjoint_spectral_bound(const OperatorSpec& spec, const SteppingOptions& opts) {
  SpectralResult out;
  LinearPeriodicSystem sys = system_of(spec);
  StepPlan plan = plan_stepping(sys, opts);
  Monodromy mono = build_monodromy_planned(sys, plan, opts);
  int n = spec.size();
  int l = spec.l;

  Eigen::VectorXd W(n);
  for (int p = 0; p < spec.grid.n(); ++p)
    for (int i = 0; i < l; ++i) W[p * l + i] = spec.grid.weights[p];

  // W-adjoint of the period map: psi -> W^{-1} M^T (W psi)
  auto apply = [&](const Eigen::VectorXd& x) {
    return (W.cwiseInverse().asDiagonal() * (mono.M.transpose() * (W.asDiagonal() * x))).eval();
  };
  PowerResult pr =
      power_iteration(apply, n, opts.power_tol, opts.power_cap, true, opts.power_vec_tol);
  double s = spec.tau * (mono.log_scale + std::log(pr.rho));

  out.s = s;
  out.rho = std::exp(s / spec.tau);
  out.power_iters = pr.iters;
  out.converged = pr.converged;
  out.gap_estimate = pr.gap_estimate;
  out.clipped_magnitude = pr.clipped + mono.clipped_magnitude;
  out.stepper_used = mono.stepper_used;
  out.steps_used = mono.steps_used;

  int steps = spec.time.steps;
  StateField psi = StateField::zeros(steps + 1, n);
  if (plan.autonomous) {
    Eigen::VectorXd w = pr.v / pr.v.cwiseAbs().maxCoeff();
    for (int k = 0; k <= steps; ++k) psi.u[k] = w;
  } else {
    // backward recursion psi_k = gauge * W^{-1} T_k^T W psi_{k+1}
    int S = plan.substeps;
    int mult = S / steps;
    double dt = 1.0 / S;
    double c = dt / (2.0 * spec.tau);
    double gauge = std::exp(-s * dt / spec.tau);
    Eigen::VectorXd cur = pr.v;
    psi.u[steps] = cur;
    for (int k = S - 1; k >= 0; --k) {
      double t = k * dt;
      Eigen::VectorXd z = W.asDiagonal() * cur;
      if (plan.stepper == Stepper::CrankNicolson) {
        Eigen::MatrixXd Gk1 = sys.assemble(t + dt);
        Eigen::MatrixXd Gk = sys.assemble(t);
        z = (Eigen::MatrixXd::Identity(n, n) - c * Gk1.transpose()).partialPivLu().solve(z);
        z = z + c * (Gk.transpose() * z);
      } else {
        Eigen::MatrixXd Gk = sys.assemble(t);
        Eigen::MatrixXd Gm = sys.assemble(t + 0.5 * dt);
        Eigen::MatrixXd Gk1 = sys.assemble(t + dt);
        double r = 1.0 / spec.tau;
        Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
        Eigen::MatrixXd K1 = r * Gk;
        Eigen::MatrixXd K2 = r * (Gm * (I + 0.5 * dt * K1));
        Eigen::MatrixXd K3 = r * (Gm * (I + 0.5 * dt * K2));
        Eigen::MatrixXd K4 = r * (Gk1 * (I + dt * K3));
        Eigen::MatrixXd T = I + (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
        z = T.transpose() * z;
      }
      cur = gauge * (W.cwiseInverse().asDiagonal() * z);
      double floor = -opts.clip_tol * cur.cwiseAbs().maxCoeff();
      for (Eigen::Index i = 0; i < cur.size(); ++i)
        if (cur[i] < 0.0 && cur[i] >= floor) cur[i] = 0.0;
      if (k % mult == 0) psi.u[k / mult] = cur;
    }
    double mx = 0.0;
    for (const auto& u : psi.u) mx = std::max(mx, u.cwiseAbs().maxCoeff());
    if (mx > 0.0)
      for (auto& u : psi.u) u /= mx;
  }
  out.adjoint_eigenfunction = psi;
  out.eigenfunction = psi;
  return out;
}

namespace {

struct NodeEigen {
  double lambda;
  Eigen::VectorXd right0;
  Eigen::VectorXd left0;
};

NodeEigen autonomous_node_eigen(const Eigen::MatrixXd& A) {
  NodeEigen ne;
  int l = static_cast<int>(A.rows());
  if (l == 1) {
    ne.lambda = A(0, 0);
    ne.right0 = Eigen::VectorXd::Ones(1);
    ne.left0 = Eigen::VectorXd::Ones(1);
    return ne;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  Eigen::Index which = 0;
  es.eigenvalues().real().maxCoeff(&which);
  ne.lambda = es.eigenvalues()[which].real();
  // Perron vectors via shifted power iteration (A + cI is nonnegative for Metzler A)
  double cshift = A.cwiseAbs().maxCoeff() + 1.0;
  Eigen::MatrixXd P = A + cshift * Eigen::MatrixXd::Identity(l, l);
  auto right = power_iteration([&P](const Eigen::VectorXd& x) { return (P * x).eval(); }, l,
                               1e-14, 5000, true);
  auto left = power_iteration(
      [&P](const Eigen::VectorXd& x) { return (P.transpose() * x).eval(); }, l, 1e-14, 5000,
      true);
  if (right.converged && right.rho > 0.0) {
    ne.right0 = right.v;
    ne.lambda = right.rho - cshift;
  } else {
    ne.right0 = es.eigenvectors().col(which).real().cwiseAbs();
  }
  ne.left0 = (left.converged && left.rho > 0.0) ? left.v : Eigen::VectorXd::Ones(l).eval();
  return ne;
}

}  // namespace

LambdaAProfile lambda_A_profile(const MatrixField& A, double tau, const SpatialGrid& grid,
                                const TimeGrid& tg, int substeps) {
  int n = grid.n();
  int l = A.l;
  int steps = tg.steps;
  LambdaAProfile prof;
  prof.lambda.resize(n);
  prof.eigfun.assign(n, Eigen::MatrixXd::Zero(l, steps + 1));
  prof.adjoint.assign(n, Eigen::MatrixXd::Zero(l, steps + 1));
  prof.residual.resize(n);

  double amax = std::max(1.0, A.max_abs());
  int S = substeps > 0
              ? substeps
              : std::max({800, 2 * steps, static_cast<int>(std::ceil(12.0 * amax / tau))});
  int mult = (S + steps - 1) / steps;
  S = mult * steps;
  double dt = 1.0 / S;

  for (int p = 0; p < n; ++p) {
    if (A.time_independent) {
      NodeEigen ne = autonomous_node_eigen(A.values[0][p]);
      prof.lambda[p] = ne.lambda;
      Eigen::VectorXd rv = ne.right0 / ne.right0.cwiseAbs().maxCoeff();
      Eigen::VectorXd qv = ne.left0 / ne.left0.cwiseAbs().maxCoeff();
      for (int k = 0; k <= steps; ++k) {
        prof.eigfun[p].col(k) = rv;
        prof.adjoint[p].col(k) = qv;
      }
      prof.residual[p] = (A.values[0][p] * rv - ne.lambda * rv).cwiseAbs().maxCoeff();
      continue;
    }

    auto Af = [&](double t) { return A.at_time(grid, p, t); };
    Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(l, l);
    for (int k = 0; k < S; ++k) {
      double t = k * dt;
      double r = 1.0 / tau;
      Eigen::MatrixXd K1 = r * (Af(t) * Phi);
      Eigen::MatrixXd K2 = r * (Af(t + 0.5 * dt) * (Phi + 0.5 * dt * K1));
      Eigen::MatrixXd K3 = r * (Af(t + 0.5 * dt) * (Phi + 0.5 * dt * K2));
      Eigen::MatrixXd K4 = r * (Af(t + dt) * (Phi + dt * K3));
      Phi += (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
    }

    auto right = power_iteration([&Phi](const Eigen::VectorXd& x) { return (Phi * x).eval(); },
                                 l, 1e-14, 3000, true);
    double rho;
    Eigen::VectorXd v0;
    if (right.converged && right.rho > 0.0) {
      rho = right.rho;
      v0 = right.v;
    } else {
      // defective Perron data: dense eigensolve fallback
      Eigen::EigenSolver<Eigen::MatrixXd> es(Phi);
      Eigen::Index which = 0;
      es.eigenvalues().cwiseAbs().maxCoeff(&which);
      rho = es.eigenvalues().cwiseAbs()[which];
      v0 = es.eigenvectors().col(which).real().cwiseAbs();
    }
    double lam = tau * std::log(rho);
    prof.lambda[p] = lam;

    auto leftp = power_iteration(
        [&Phi](const Eigen::VectorXd& x) { return (Phi.transpose() * x).eval(); }, l, 1e-14,
        3000, true);
    Eigen::VectorXd w0 =
        (leftp.converged && leftp.rho > 0.0) ? leftp.v : Eigen::VectorXd::Ones(l).eval();

    Eigen::VectorXd v = v0, w = w0;
    double gauge = std::exp(-lam * dt / tau);
    prof.eigfun[p].col(0) = v;
    prof.adjoint[p].col(0) = w;
    for (int k = 0; k < S; ++k) {
      double t = k * dt;
      double r = 1.0 / tau;
      {
        Eigen::VectorXd K1 = r * (Af(t) * v);
        Eigen::VectorXd K2 = r * (Af(t + 0.5 * dt) * (v + 0.5 * dt * K1));
        Eigen::VectorXd K3 = r * (Af(t + 0.5 * dt) * (v + 0.5 * dt * K2));
        Eigen::VectorXd K4 = r * (Af(t + dt) * (v + dt * K3));
        v += (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
        v *= gauge;
      }
      {
        // adjoint ODE: tau w' = (lambda I - A^T) w
        auto rhs = [&](double tt, const Eigen::VectorXd& z) {
          return ((1.0 / tau) * (lam * z - Af(tt).transpose() * z)).eval();
        };
        Eigen::VectorXd K1 = rhs(t, w);
        Eigen::VectorXd K2 = rhs(t + 0.5 * dt, w + 0.5 * dt * K1);
        Eigen::VectorXd K3 = rhs(t + 0.5 * dt, w + 0.5 * dt * K2);
        Eigen::VectorXd K4 = rhs(t + dt, w + dt * K3);
        w += (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
      }
      if ((k + 1) % mult == 0) {
        prof.eigfun[p].col((k + 1) / mult) = v;
        prof.adjoint[p].col((k + 1) / mult) = w;
      }
    }
    double emax = prof.eigfun[p].cwiseAbs().maxCoeff();
    if (emax > 0.0) prof.eigfun[p] /= emax;
    double wmax = prof.adjoint[p].cwiseAbs().maxCoeff();
    if (wmax > 0.0) prof.adjoint[p] /= wmax;

    // residual of -tau phi' + A phi = lambda phi with 4th order differences
    double res = 0.0;
    double dtg = tg.dt;
    auto wrap = [steps](int i) { return ((i % steps) + steps) % steps; };
    for (int k = 0; k < steps; ++k) {
      Eigen::VectorXd dphi =
          (prof.eigfun[p].col(wrap(k - 2)) - 8.0 * prof.eigfun[p].col(wrap(k - 1)) +
           8.0 * prof.eigfun[p].col(wrap(k + 1)) - prof.eigfun[p].col(wrap(k + 2))) /
          (12.0 * dtg);
      Eigen::VectorXd rr = -tau * dphi + A.values[k][p] * prof.eigfun[p].col(k) -
                           lam * prof.eigfun[p].col(k);
      res = std::max(res, rr.cwiseAbs().maxCoeff());
    }
    prof.residual[p] = res;
  }

  prof.max_lambda = prof.lambda.maxCoeff();
  prof.argmax = 0;
  for (int p = 0; p < n; ++p)
    if (prof.lambda[p] > prof.lambda[prof.argmax]) prof.argmax = p;
  return prof;
}

MatrixField local_part_field(const OperatorSpec& spec) {
  int n = spec.grid.n();
  int steps = spec.time.steps;
  std::vector<std::vector<Eigen::MatrixXd>> vals(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    vals[k].reserve(n);
    for (int p = 0; p < n; ++p) {
      Eigen::MatrixXd a = spec.A.values[k][p];
      Eigen::VectorXd of = spec.outflow(p, spec.time.knots[k]);
      for (int i = 0; i < spec.l; ++i) a(i, i) -= of[i];
      vals[k].push_back(std::move(a));
    }
  }
  MatrixField f = tabulated_field(std::move(vals), spec.l);
  if (spec.A.has_analytic && (spec.form == CouplingForm::Raw || spec.D.has_analytic)) {
    if (spec.form == CouplingForm::Raw) {
      f.analytic = spec.A.analytic;
    } else {
      auto a = spec.A.analytic;
      auto d = spec.D.analytic;
      double scale = std::pow(spec.sigma, -spec.m);
      f.analytic = [a, d, scale](const Point& x, double t) {
        Eigen::MatrixXd v = a(x, t);
        Eigen::VectorXd dd = d(x, t).diagonal();
        for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, i) -= scale * dd[i];
        return v;
      };
    }
    f.has_analytic = true;
  }
  return f;
}

StateField apply_M(const OperatorSpec& spec, const StateField& phi) {
  int n = spec.grid.n();
  int l = spec.l;
  StateField out = StateField::zeros(phi.knots(), n * l);
  int steps = phi.knots() - 1;
  for (int k = 0; k <= steps; ++k) {
    double t = static_cast<double>(k) / steps;
    Eigen::MatrixXd Pu(n, l);
    for (int j = 0; j < l; ++j) {
      Eigen::VectorXd uj(n);
      for (int p = 0; p < n; ++p) uj[p] = phi.u[k][p * l + j];
      Pu.col(j) = kernel_matrix(spec, j, t) * uj;
    }
    for (int p = 0; p < n; ++p) {
      Eigen::MatrixXd Deff = spec.inflow_matrix(p, t);
      for (int i = 0; i < l; ++i) {
        double acc = 0.0;
        for (int j = 0; j < l; ++j) acc += Deff(i, j) * Pu(p, j);
        out.u[k][p * l + i] = acc;
      }
    }
  }
  return out;
}

ContactFit contact_exponent_fit(const Eigen::VectorXd& lambda, const SpatialGrid& grid) {
  ContactFit fit;
  int n = static_cast<int>(lambda.size());
  double mx = lambda.maxCoeff();
  double mn = lambda.minCoeff();
  double scale = std::max(1.0, std::abs(mx));

  if (mx - mn <= 1e-12 * scale) {
    fit.flat = true;
    fit.flag = true;
    return fit;
  }
  int argmax = 0;
  for (int p = 0; p < n; ++p)
    if (lambda[p] > lambda[argmax]) argmax = p;

  // a contiguous plateau at the max gives the argmax positive measure
  int plateau = 1;
  auto near_max = [&](int p) { return mx - lambda[p] <= 1e-12 * scale; };
  if (grid.dim == 1) {
    for (int p = argmax + 1; p < n && near_max(p); ++p) ++plateau;
    for (int p = argmax - 1; p >= 0 && near_max(p); --p) ++plateau;
  } else {
    int nx = grid.n_axis[0], ny = grid.n_axis[1];
    std::vector<int> stack = {argmax};
    std::vector<char> seen(n, 0);
    seen[argmax] = 1;
    plateau = 0;
    while (!stack.empty()) {
      int p = stack.back();
      stack.pop_back();
      ++plateau;
      int ix = p % nx, iy = p / nx;
      for (int q : {p - 1, p + 1, p - nx, p + nx}) {
        if (q < 0 || q >= n || seen[q]) continue;
        int qx = q % nx, qy = q / nx;
        if (std::abs(qx - ix) + std::abs(qy - iy) != 1) continue;
        if (near_max(q)) {
          seen[q] = 1;
          stack.push_back(q);
        }
      }
    }
  }
  // two adjacent equal maxima arise when a smooth strict max straddles a cell
  // boundary; require three before declaring a genuine plateau
  if (plateau >= 3) {
    fit.flat = true;
    fit.flag = true;
    return fit;
  }

  double diam = grid.bounds.hi[0] - grid.bounds.lo[0];
  if (grid.dim == 2) {
    double dy = grid.bounds.hi[1] - grid.bounds.lo[1];
    diam = std::sqrt(diam * diam + dy * dy);
  }
  double rwin = 0.25 * diam;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (int p = 0; p < n; ++p) {
    if (p == argmax) continue;
    double r = dist(grid.nodes[p], grid.nodes[argmax], grid.dim);
    double gap = mx - lambda[p];
    if (r <= 0.0 || r > rwin || gap <= 1e-13 * scale) continue;
    double lx = std::log(r), ly = std::log(gap);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  fit.points_used = m;
  if (m < 3) {
    fit.flag = false;
    return fit;
  }
  fit.exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  fit.flag = fit.exponent >= grid.dim - 1e-2;
  return fit;
}

ExistenceReport existence_criteria(const OperatorSpec& spec, const SteppingOptions& opts) {
  ExistenceReport rep;
  MatrixField local = local_part_field(spec);
  LambdaAProfile prof = lambda_A_profile(local, spec.tau, spec.grid, spec.time);
  SpectralResult sb = spectral_bound(spec, opts);

  rep.s = sb.s;
  rep.s_N = prof.max_lambda;
  rep.criterion_i = sb.s > rep.s_N + 1e-7;

  // criterion (ii): scan r(F_alpha) = r(M (alpha I - N)^{-1}) over a geometric
  // grid of offsets above s_N, largest alpha first
  {
    OperatorSpec specF = spec;
    specF.time = build_time_grid(std::min(spec.time.steps, 128));
    specF.A = local;
    specF.prepare();
    double range = std::max({1.0, 2.0 * (sb.s - rep.s_N), 0.1 * std::abs(rep.s_N)});
    int nl = specF.size();
    int knots = specF.time.steps + 1;
    int size = nl * knots;
    for (int j = 0; j < 12 && !rep.criterion_ii; ++j) {
      double alpha = rep.s_N + range * std::pow(2.0, -j);
      auto applyF = [&](const Eigen::VectorXd& x) {
        StateField phi = StateField::zeros(knots, nl);
        for (int k = 0; k < knots; ++k)
          phi.u[k] = x.segment(static_cast<Eigen::Index>(k) * nl, nl);
        phi.u[knots - 1] = phi.u[0];
        StateField res = apply_M(specF, resolvent_N(specF, alpha, phi));
        Eigen::VectorXd y(size);
        for (int k = 0; k < knots; ++k)
          y.segment(static_cast<Eigen::Index>(k) * nl, nl) = res.u[k];
        return y;
      };
      PowerResult pf = power_iteration(applyF, size, 1e-6, 150, true);
      if (pf.rho >= 1.0 - 1e-6) {
        rep.criterion_ii = true;
        rep.alpha_witness = alpha;
        rep.r_at_witness = pf.rho;
      }
    }
  }

  ContactFit fit = contact_exponent_fit(prof.lambda, spec.grid);
  rep.nonintegrable_flag = fit.flag;
  rep.contact_exponent = fit.exponent;
  rep.flat_profile = fit.flat;

  rep.simplicity = sb.gap_estimate < 0.95;

  bool h2t;
  {
    // irreducibility of the effective inflow matrix or of A, at every sample
    int n = spec.grid.n();
    bool d_irr = true;
    for (int k = 0; k <= spec.time.steps && d_irr; ++k)
      for (int p = 0; p < n; ++p)
        if (!matrix_irreducible(spec.inflow_matrix(p, spec.time.knots[k]))) {
          d_irr = false;
          break;
        }
    h2t = d_irr || field_irreducible(spec.A);
  }
  double fmin = std::numeric_limits<double>::infinity();
  for (const auto& u : sb.eigenfunction.u) fmin = std::min(fmin, u.minCoeff());

  bool positivity_ok = h2t ? fmin > 0.0 : fmin >= 0.0;
  rep.is_principal_eigenvalue =
      (rep.criterion_i || rep.criterion_ii) && sb.residual <= 1e-6 && positivity_ok;
  if (rep.is_principal_eigenvalue)
    rep.reason = rep.criterion_i ? "criterion (i): s(L) > s(N)"
                                 : "criterion (ii): r(F_alpha) >= 1 witness found";
  else
    rep.reason = "spectrum point only: criteria not met at this resolution";
  return rep;
}

double frozen_time_bound(const OperatorSpec& spec, double t) {
  Eigen::MatrixXd G = assemble_dense(spec, t, std::numeric_limits<int>::max());
  double c = G.cwiseAbs().rowwise().sum().maxCoeff() + 1.0;
  Eigen::MatrixXd P = G + c * Eigen::MatrixXd::Identity(G.rows(), G.cols());
  auto pr = power_iteration([&P](const Eigen::VectorXd& x) { return (P * x).eval(); },
                            static_cast<int>(G.rows()), 1e-12, 20000, true);
  if (pr.converged && pr.rho > 0.0) return pr.rho - c;
  // convergence cap hit: dense fallback
  return G.eigenvalues().real().maxCoeff();
}

}  // namespace nls
