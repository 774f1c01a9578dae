#include "nls/models.hpp"

#include <cmath>
#include <stdexcept>

namespace nls {

namespace {

void clip_state(Eigen::VectorXd& u, double& clipped) {
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (u[i] < 0.0) {
      clipped += -u[i];
      u[i] = 0.0;
    }
}

}  // namespace

Trajectory integrate_split(const SplitSystem& sys, const Eigen::VectorXd& u0, int max_periods,
                           double periodic_tol, double blowup_guard, double stop_norm) {
  Trajectory traj;
  int S = sys.steps_per_period;
  double dt = 1.0 / S;
  double c = dt / (4.0 * sys.tau);  // CN coefficient of a half step
  int n = sys.size;
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  Eigen::MatrixXd G0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu0;
  if (sys.linear_time_independent) {
    G0 = sys.linear(0.0);
    lu0.compute(I - c * G0);
  }

  auto cn_half = [&](Eigen::VectorXd u, double tmid) {
    if (sys.linear_time_independent) return lu0.solve(u + c * (G0 * u)).eval();
    Eigen::MatrixXd G = sys.linear(tmid - std::floor(tmid));
    return (I - c * G).partialPivLu().solve(u + c * (G * u)).eval();
  };

  Eigen::VectorXd u = u0;
  clip_state(u, traj.clipped);
  traj.period_states.push_back(u);

  for (int period = 0; period < max_periods; ++period) {
    traj.prev_period = std::move(traj.last_period);
    traj.last_period.clear();
    traj.last_period.push_back(u);
    for (int k = 0; k < S; ++k) {
      double t = k * dt;
      u = cn_half(u, t + 0.25 * dt);
      clip_state(u, traj.clipped);
      {
        Eigen::VectorXd r1 = sys.reaction(t, u);
        Eigen::VectorXd ut = u + (dt / sys.tau) * r1;
        clip_state(ut, traj.clipped);
        Eigen::VectorXd r2 = sys.reaction(t + dt, ut);
        u = u + (dt / (2.0 * sys.tau)) * (r1 + r2);
        clip_state(u, traj.clipped);
      }
      u = cn_half(u, t + 0.75 * dt);
      clip_state(u, traj.clipped);
      if (!u.allFinite() || u.cwiseAbs().maxCoeff() > blowup_guard) {
        traj.blowup = true;
        traj.diagnosis = "norm blowup beyond guard at period " + std::to_string(period) +
                         ", step " + std::to_string(k);
        traj.periods = period;
        return traj;
      }
      traj.last_period.push_back(u);
    }
    traj.period_states.push_back(u);
    traj.periods = period + 1;

    if (!traj.prev_period.empty()) {
      double res = 0.0;
      for (int k = 0; k <= S; ++k)
        res = std::max(res,
                       (traj.last_period[k] - traj.prev_period[k]).cwiseAbs().maxCoeff());
      traj.periodic_residual = res;
      if (res <= periodic_tol) {
        traj.reached_periodic = true;
        break;
      }
    }
    if (stop_norm > 0.0 && u.cwiseAbs().maxCoeff() >= stop_norm) break;
  }
  return traj;
}

namespace {

// per-species dispersal matrices d_s(x,t) sigma^{-m} (K_s - I)
struct DispersalData {
  std::vector<Eigen::MatrixXd> K;  // kernel matrices at sigma scale
  KernelSet scaled;
  bool time_independent = true;
};

DispersalData make_dispersal(const KernelSet& base, double sigma, const SpatialGrid& grid) {
  DispersalData dd;
  dd.scaled = sigma == 1.0 ? base : rescale_kernel(base, sigma);
  int n = grid.n();
  for (const auto& ker : dd.scaled.kernels) {
    dd.time_independent = dd.time_independent && ker.time_independent;
    Eigen::MatrixXd K(n, n);
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        K(p, q) = ker(grid.nodes[p], grid.nodes[q], 0.0) * grid.weights[q];
    dd.K.push_back(std::move(K));
  }
  return dd;
}

bool scalar_fn_time_independent(const ScalarFn& f, const SpatialGrid& grid) {
  for (double t : {0.37, 0.74})
    for (int p = 0; p < grid.n(); p += std::max(1, grid.n() / 16))
      if (std::abs(f(grid.nodes[p], t) - f(grid.nodes[p], 0.0)) > 1e-14) return false;
  return true;
}

int knot_index(double t, int steps) {
  double tt = t - std::floor(t);
  int k = static_cast<int>(std::lround(tt * steps));
  return std::min(k, steps);
}

}  // namespace

SplitSystem zika_system(const ZikaParams& zp) {
  auto dd = std::make_shared<DispersalData>(make_dispersal(zp.kernels, zp.sigma, zp.grid));
  int n = zp.grid.n();
  double scale = std::pow(zp.sigma, -zp.m);
  auto grid_ptr = std::make_shared<SpatialGrid>(zp.grid);

  SplitSystem sys;
  sys.tau = zp.tau;
  sys.size = 3 * n;
  sys.steps_per_period = zp.time.steps;
  sys.linear_time_independent = dd->time_independent &&
                                scalar_fn_time_independent(zp.d1, zp.grid) &&
                                scalar_fn_time_independent(zp.d2, zp.grid);
  auto d1 = zp.d1, d2 = zp.d2;
  sys.linear = [dd, n, scale, d1, d2, grid_ptr](double t) {
    const SpatialGrid& grid = *grid_ptr;
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    for (int p = 0; p < n; ++p) {
      double r1 = d1(grid.nodes[p], t) * scale;
      double r2 = d2(grid.nodes[p], t) * scale;
      for (int q = 0; q < n; ++q) {
        Z(3 * p + 0, 3 * q + 0) += r1 * dd->K[0](p, q);
        Z(3 * p + 1, 3 * q + 1) += r2 * dd->K[1](p, q);
        Z(3 * p + 2, 3 * q + 2) += r2 * dd->K[1](p, q);
      }
      Z(3 * p + 0, 3 * p + 0) -= r1;
      Z(3 * p + 1, 3 * p + 1) -= r2;
      Z(3 * p + 2, 3 * p + 2) -= r2;
    }
    return Z;
  };
  auto Hu = zp.H_u;
  auto rho = zp.rho, s1 = zp.sigma1, s2 = zp.sigma2, beta = zp.beta, mu = zp.mu;
  sys.reaction = [n, grid_ptr, Hu, rho, s1, s2, beta, mu](double t, const Eigen::VectorXd& u) {
    const SpatialGrid& grid = *grid_ptr;
    Eigen::VectorXd out(3 * n);
    for (int p = 0; p < n; ++p) {
      const Point& x = grid.nodes[p];
      double H = u[3 * p + 0], Vu = u[3 * p + 1], Vi = u[3 * p + 2];
      double V = Vu + Vi;
      out[3 * p + 0] = -rho(x, t) * H + s1(x, t) * Hu(x) * Vi;
      out[3 * p + 1] = -s2(x, t) * Vu * H + beta(x, t) * V - mu(x, t) * V * Vu;
      out[3 * p + 2] = s2(x, t) * Vu * H - mu(x, t) * V * Vi;
    }
    return out;
  };
  return sys;
}

SplitSystem zika_comparison_system(const ZikaParams& zp, const StateField& V_star, double eps) {
  auto dd = std::make_shared<DispersalData>(make_dispersal(zp.kernels, zp.sigma, zp.grid));
  int n = zp.grid.n();
  double scale = std::pow(zp.sigma, -zp.m);
  auto grid_ptr = std::make_shared<SpatialGrid>(zp.grid);
  int steps = zp.time.steps;

  SplitSystem sys;
  sys.tau = zp.tau;
  sys.size = 2 * n;
  sys.steps_per_period = steps;
  sys.linear_time_independent = dd->time_independent &&
                                scalar_fn_time_independent(zp.d1, zp.grid) &&
                                scalar_fn_time_independent(zp.d2, zp.grid);
  auto d1 = zp.d1, d2 = zp.d2;
  sys.linear = [dd, n, scale, d1, d2, grid_ptr](double t) {
    const SpatialGrid& grid = *grid_ptr;
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int p = 0; p < n; ++p) {
      double r1 = d1(grid.nodes[p], t) * scale;
      double r2 = d2(grid.nodes[p], t) * scale;
      for (int q = 0; q < n; ++q) {
        Z(2 * p + 0, 2 * q + 0) += r1 * dd->K[0](p, q);
        Z(2 * p + 1, 2 * q + 1) += r2 * dd->K[1](p, q);
      }
      Z(2 * p + 0, 2 * p + 0) -= r1;
      Z(2 * p + 1, 2 * p + 1) -= r2;
    }
    return Z;
  };
  auto Hu = zp.H_u;
  auto rho = zp.rho, s1 = zp.sigma1, s2 = zp.sigma2, mu = zp.mu;
  auto V = std::make_shared<StateField>(V_star);
  sys.reaction = [n, grid_ptr, Hu, rho, s1, s2, mu, V, steps, eps](double t,
                                                                   const Eigen::VectorXd& u) {
    const SpatialGrid& grid = *grid_ptr;
    int k = knot_index(t, steps);
    Eigen::VectorXd out(2 * n);
    for (int p = 0; p < n; ++p) {
      const Point& x = grid.nodes[p];
      double H = u[2 * p + 0], Vi = u[2 * p + 1];
      double Vs = V->u[k][p];
      out[2 * p + 0] = -rho(x, t) * H + s1(x, t) * Hu(x) * Vi;
      out[2 * p + 1] =
          s2(x, t) * std::max(Vs + eps - Vi, 0.0) * H - mu(x, t) * (Vs - eps) * Vi;
    }
    return out;
  };
  return sys;
}

SplitSystem stemcell_system(const StemCellParams& sp) {
  auto dd = std::make_shared<DispersalData>(make_dispersal(sp.kernels, 1.0, sp.grid));
  int n = sp.grid.n();
  int l = sp.l;
  auto grid_ptr = std::make_shared<SpatialGrid>(sp.grid);

  SplitSystem sys;
  sys.tau = sp.tau;
  sys.size = n * l;
  sys.steps_per_period = sp.time.steps;
  bool ti = dd->time_independent;
  for (const auto& b : sp.beta) ti = ti && scalar_fn_time_independent(b, sp.grid);
  sys.linear_time_independent = ti;
  auto c = sp.c;
  auto beta = sp.beta;
  sys.linear = [dd, n, l, c, beta, grid_ptr](double t) {
    const SpatialGrid& grid = *grid_ptr;
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n * l, n * l);
    for (int p = 0; p < n; ++p)
      for (int i = 0; i < l; ++i)
        for (int j = 0; j < l; ++j) {
          if (c(i, j) == 0.0) continue;
          for (int q = 0; q < n; ++q)
            Z(p * l + i, q * l + j) += c(i, j) * beta[j](grid.nodes[q], t) * dd->K[j](p, q);
        }
    return Z;
  };
  auto kappa = sp.kappa;
  double nexp = sp.n_exp;
  sys.reaction = [n, l, beta, kappa, nexp, grid_ptr](double t, const Eigen::VectorXd& u) {
    const SpatialGrid& grid = *grid_ptr;
    Eigen::VectorXd out(n * l);
    for (int p = 0; p < n; ++p)
      for (int i = 0; i < l; ++i) {
        double q = u[p * l + i];
        double removal = nexp == 0.0 ? kappa[i](grid.nodes[p], t)
                                     : kappa[i](grid.nodes[p], t) * std::pow(q, nexp);
        out[p * l + i] = -q * (beta[i](grid.nodes[p], t) + removal);
      }
    return out;
  };
  return sys;
}

Trajectory integrate_system(const ZikaParams& zp, const Eigen::VectorXd& u0, int periods) {
  return integrate_split(zika_system(zp), u0, periods);
}

Trajectory integrate_system(const StemCellParams& sp, const Eigen::VectorXd& u0, int periods) {
  return integrate_split(stemcell_system(sp), u0, periods);
}

OperatorSpec zika_L0_spec(const ZikaParams& zp) {
  OperatorSpec spec;
  spec.tau = zp.tau;
  spec.m = zp.m;
  spec.sigma = zp.sigma;
  spec.form = CouplingForm::Scaled;
  spec.C = Eigen::MatrixXd::Ones(1, 1);
  spec.grid = zp.grid;
  spec.time = zp.time;
  auto d2 = zp.d2, beta = zp.beta;
  spec.D = sample_field(
      [d2](const Point& x, double t) { return Eigen::MatrixXd::Constant(1, 1, d2(x, t)); }, 1,
      zp.grid, zp.time);
  spec.A = sample_field(
      [beta](const Point& x, double t) { return Eigen::MatrixXd::Constant(1, 1, beta(x, t)); },
      1, zp.grid, zp.time);
  KernelSet ks;
  ks.l = 1;
  ks.dim = zp.kernels.dim;
  ks.kernels = {zp.kernels.kernels[1]};
  spec.kernels = rescale_kernel(ks, zp.sigma);
  spec.bc = BCMode::Dirichlet;
  spec.prepare();
  return spec;
}

OperatorSpec zika_L1_spec(const ZikaParams& zp, const StateField& V_star) {
  OperatorSpec spec;
  spec.tau = zp.tau;
  spec.m = zp.m;
  spec.sigma = zp.sigma;
  spec.form = CouplingForm::Scaled;
  spec.C = Eigen::MatrixXd::Identity(2, 2);
  spec.grid = zp.grid;
  spec.time = zp.time;
  auto d1 = zp.d1, d2 = zp.d2;
  spec.D = sample_field(
      [d1, d2](const Point& x, double t) {
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(2, 2);
        v(0, 0) = d1(x, t);
        v(1, 1) = d2(x, t);
        return v;
      },
      2, zp.grid, zp.time);
  int n = zp.grid.n();
  std::vector<std::vector<Eigen::MatrixXd>> vals(zp.time.steps + 1);
  for (int k = 0; k <= zp.time.steps; ++k) {
    double t = zp.time.knots[k];
    vals[k].reserve(n);
    for (int p = 0; p < n; ++p) {
      const Point& x = zp.grid.nodes[p];
      double Vs = V_star.u[k][p];
      Eigen::MatrixXd a(2, 2);
      a(0, 0) = -zp.rho(x, t);
      a(0, 1) = zp.sigma1(x, t) * zp.H_u(x);
      a(1, 0) = zp.sigma2(x, t) * Vs;
      a(1, 1) = -zp.mu(x, t) * Vs;
      vals[k].push_back(std::move(a));
    }
  }
  spec.A = tabulated_field(std::move(vals), 2);
  KernelSet ks;
  ks.l = 2;
  ks.dim = zp.kernels.dim;
  ks.kernels = {zp.kernels.kernels[0], zp.kernels.kernels[1]};
  spec.kernels = rescale_kernel(ks, zp.sigma);
  spec.bc = BCMode::Dirichlet;
  spec.prepare();
  return spec;
}

namespace {

// scalar logistic vector equation (4-3) as a split system
SplitSystem zika_V_system(const ZikaParams& zp) {
  auto dd = std::make_shared<DispersalData>(make_dispersal(zp.kernels, zp.sigma, zp.grid));
  int n = zp.grid.n();
  double scale = std::pow(zp.sigma, -zp.m);
  auto grid_ptr = std::make_shared<SpatialGrid>(zp.grid);

  SplitSystem sys;
  sys.tau = zp.tau;
  sys.size = n;
  sys.steps_per_period = zp.time.steps;
  sys.linear_time_independent =
      dd->time_independent && scalar_fn_time_independent(zp.d2, zp.grid);
  auto d2 = zp.d2;
  sys.linear = [dd, n, scale, d2, grid_ptr](double t) {
    const SpatialGrid& grid = *grid_ptr;
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n);
    for (int p = 0; p < n; ++p) {
      double r2 = d2(grid.nodes[p], t) * scale;
      for (int q = 0; q < n; ++q) Z(p, q) += r2 * dd->K[1](p, q);
      Z(p, p) -= r2;
    }
    return Z;
  };
  auto beta = zp.beta, mu = zp.mu;
  sys.reaction = [n, grid_ptr, beta, mu](double t, const Eigen::VectorXd& u) {
    const SpatialGrid& grid = *grid_ptr;
    Eigen::VectorXd out(n);
    for (int p = 0; p < n; ++p) {
      const Point& x = grid.nodes[p];
      out[p] = beta(x, t) * u[p] - mu(x, t) * u[p] * u[p];
    }
    return out;
  };
  return sys;
}

StateField to_state_field(const std::vector<Eigen::VectorXd>& knots) {
  StateField f;
  f.u = knots;
  return f;
}

}  // namespace

ZikaThresholds zika_thresholds(const ZikaParams& zp, const SteppingOptions& opts) {
  ZikaThresholds th;
  th.s_L0 = spectral_bound(zika_L0_spec(zp), opts).s;
  if (th.s_L0 <= 1e-12) return th;

  Trajectory vt = integrate_split(zika_V_system(zp), Eigen::VectorXd::Ones(zp.grid.n()), 500,
                                  1e-7);
  if (!vt.reached_periodic)
    throw std::runtime_error("zika_thresholds: V* extraction did not reach periodicity");
  th.V_star = to_state_field(vt.last_period);
  th.has_V_star = true;
  th.s_L1 = spectral_bound(zika_L1_spec(zp, th.V_star), opts).s;
  th.s_L1_defined = true;
  return th;
}

ZikaClassification classify_zika(const ZikaParams& zp, const Eigen::VectorXd& u0, int periods,
                                 const SteppingOptions& opts) {
  ZikaClassification out;
  out.thresholds = zika_thresholds(zp, opts);
  const auto& th = out.thresholds;

  if (std::abs(th.s_L0) <= 1e-3 || (th.s_L0 > 0.0 && th.s_L1_defined && std::abs(th.s_L1) <= 1e-3)) {
    out.verdict = ZikaVerdict::Inconclusive;
    out.verdict_name = "inconclusive (near-critical)";
    return out;
  }

  Trajectory full = integrate_split(zika_system(zp), u0, periods, 1e-9);
  out.periods_run = full.periods;
  out.final_period = StateField{full.last_period};
  int n = zp.grid.n();
  int S = zp.time.steps;

  if (th.s_L0 < 0.0) {
    out.verdict = ZikaVerdict::Extinction;
    out.verdict_name = "extinction";
    double mass = 0.0;
    const Eigen::VectorXd& uf = full.period_states.back();
    for (int p = 0; p < n; ++p)
      mass += zp.grid.weights[p] * (uf[3 * p] + uf[3 * p + 1] + uf[3 * p + 2]);
    out.evidence = mass;
    out.evidence_note = "total mass at final time";
    return out;
  }

  if (th.s_L1 > 0.0) {
    out.verdict = ZikaVerdict::Endemic;
    out.verdict_name = "endemic";
    // extract the positive periodic solution of the (H_i, V_i) system (4-4)
    auto dd = std::make_shared<DispersalData>(make_dispersal(zp.kernels, zp.sigma, zp.grid));
    SplitSystem hv;
    hv.tau = zp.tau;
    hv.size = 2 * n;
    hv.steps_per_period = S;
    hv.linear_time_independent = dd->time_independent &&
                                 scalar_fn_time_independent(zp.d1, zp.grid) &&
                                 scalar_fn_time_independent(zp.d2, zp.grid);
    double scale = std::pow(zp.sigma, -zp.m);
    auto grid_ptr = std::make_shared<SpatialGrid>(zp.grid);
    auto d1 = zp.d1, d2 = zp.d2;
    hv.linear = [dd, n, scale, d1, d2, grid_ptr](double t) {
      const SpatialGrid& grid = *grid_ptr;
      Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2 * n, 2 * n);
      for (int p = 0; p < n; ++p) {
        double r1 = d1(grid.nodes[p], t) * scale;
        double r2 = d2(grid.nodes[p], t) * scale;
        for (int q = 0; q < n; ++q) {
          Z(2 * p + 0, 2 * q + 0) += r1 * dd->K[0](p, q);
          Z(2 * p + 1, 2 * q + 1) += r2 * dd->K[1](p, q);
        }
        Z(2 * p + 0, 2 * p + 0) -= r1;
        Z(2 * p + 1, 2 * p + 1) -= r2;
      }
      return Z;
    };
    auto Hu = zp.H_u;
    auto rho = zp.rho, s1f = zp.sigma1, s2f = zp.sigma2, mu = zp.mu;
    auto V = std::make_shared<StateField>(th.V_star);
    hv.reaction = [n, grid_ptr, Hu, rho, s1f, s2f, mu, V, S](double t, const Eigen::VectorXd& u) {
      const SpatialGrid& grid = *grid_ptr;
      int k = knot_index(t, S);
      Eigen::VectorXd out2(2 * n);
      for (int p = 0; p < n; ++p) {
        const Point& x = grid.nodes[p];
        double H = u[2 * p + 0], Vi = u[2 * p + 1];
        double Vs = V->u[k][p];
        out2[2 * p + 0] = -rho(x, t) * H + s1f(x, t) * Hu(x) * Vi;
        out2[2 * p + 1] = s2f(x, t) * (Vs - Vi) * H - mu(x, t) * Vs * Vi;
      }
      return out2;
    };
    Trajectory attr = integrate_split(hv, Eigen::VectorXd::Constant(2 * n, 0.01), 500, 1e-8);
    if (!attr.reached_periodic)
      throw std::runtime_error("classify_zika: endemic attractor extraction failed");

    double dist = 0.0;
    for (int k = 0; k <= S; ++k) {
      for (int p = 0; p < n; ++p) {
        double Hs = attr.last_period[k][2 * p + 0];
        double Vis = attr.last_period[k][2 * p + 1];
        double Vs = th.V_star.u[k][p];
        dist = std::max(dist, std::abs(full.last_period[k][3 * p + 0] - Hs));
        dist = std::max(dist, std::abs(full.last_period[k][3 * p + 1] - (Vs - Vis)));
        dist = std::max(dist, std::abs(full.last_period[k][3 * p + 2] - Vis));
      }
    }
    out.evidence = dist;
    out.evidence_note = "final-period distance to (H_i*, V* - V_i*, V_i*)";
    return out;
  }

  out.verdict = ZikaVerdict::VectorOnly;
  out.verdict_name = "vector_only";
  const Eigen::VectorXd& uf = full.period_states.back();
  double infected = 0.0, vu_dist = 0.0;
  for (int p = 0; p < n; ++p) {
    infected = std::max({infected, std::abs(uf[3 * p + 0]), std::abs(uf[3 * p + 2])});
    vu_dist = std::max(vu_dist, std::abs(full.last_period[S][3 * p + 1] - th.V_star.u[S][p]));
  }
  out.evidence = infected;
  out.evidence_note =
      "max |(H_i, V_i)| at final time; |V_u - V*| = " + std::to_string(vu_dist);
  return out;
}

OperatorSpec stemcell_Ln_spec(const StemCellParams& sp) {
  OperatorSpec spec;
  spec.tau = sp.tau;
  spec.form = CouplingForm::Raw;
  spec.grid = sp.grid;
  spec.time = sp.time;
  int l = sp.l;
  auto c = sp.c;
  auto beta = sp.beta;
  auto kappa = sp.kappa;
  double nexp = sp.n_exp;
  spec.D = sample_field(
      [c, beta, l](const Point& x, double t) {
        Eigen::MatrixXd v(l, l);
        for (int i = 0; i < l; ++i)
          for (int j = 0; j < l; ++j) v(i, j) = c(i, j) * beta[j](x, t);
        return v;
      },
      l, sp.grid, sp.time);
  spec.A = sample_field(
      [beta, kappa, nexp, l](const Point& x, double t) {
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(l, l);
        for (int i = 0; i < l; ++i)
          v(i, i) = -(beta[i](x, t) + (nexp == 0.0 ? kappa[i](x, t) : 0.0));
        return v;
      },
      l, sp.grid, sp.time);
  spec.kernels = sp.kernels;
  spec.prepare();
  return spec;
}

StemCellClassification classify_stemcell(const StemCellParams& sp, const Eigen::VectorXd& Q0,
                                         int periods, const SteppingOptions& opts) {
  if (sp.n_exp != 0.0 && sp.n_exp <= 1.0)
    throw std::invalid_argument("classify_stemcell: n must be 0 or > 1");

  StemCellClassification out;
  OperatorSpec Ln = stemcell_Ln_spec(sp);
  SpectralResult sb = spectral_bound(Ln, opts);
  out.s = sb.s;
  int n = sp.grid.n();
  int l = sp.l;

  if (sp.n_exp == 0.0) {
    if (std::abs(sb.s) <= 1e-6) {
      out.verdict = StemVerdict::Neutral;
      out.verdict_name = "neutral";
      SpectralResult adj = adjoint_spectral_bound(Ln, opts);
      const Eigen::VectorXd& phi0 = sb.eigenfunction.u[0];
      const Eigen::VectorXd& psi0 = adj.adjoint_eigenfunction.u[0];
      double num = 0.0, den = 0.0;
      for (int p = 0; p < n; ++p)
        for (int i = 0; i < l; ++i) {
          num += sp.grid.weights[p] * Q0[p * l + i] * psi0[p * l + i];
          den += sp.grid.weights[p] * phi0[p * l + i] * psi0[p * l + i];
        }
      out.c_pairing = num / den;
      Trajectory traj = integrate_split(stemcell_system(sp), Q0, periods, 1e-12);
      out.periods_run = traj.periods;
      out.final_period = StateField{traj.last_period};
      out.evidence =
          (traj.period_states.back() - out.c_pairing * phi0).cwiseAbs().maxCoeff();
      out.evidence_note = "distance to c*phi at the final integer time";
      return out;
    }
    Trajectory traj = integrate_split(stemcell_system(sp), Q0, periods, 0.0, 1e12,
                                      sb.s > 0.0 ? 1e8 : 0.0);
    out.periods_run = traj.periods;
    if (!traj.last_period.empty()) out.final_period = StateField{traj.last_period};
    int m = static_cast<int>(traj.period_states.size());
    if (sb.s > 0.0) {
      out.verdict = StemVerdict::Growth;
      out.verdict_name = "growth";
      out.evidence = traj.period_states.back().cwiseAbs().maxCoeff() /
                     std::max(1e-300, Q0.cwiseAbs().maxCoeff());
      out.evidence_note = traj.blowup ? "guard-stopped growth" : "norm growth factor";
      return out;
    }
    out.verdict = StemVerdict::Decay;
    out.verdict_name = "decay";
    // per-period log rate over the last few periods
    int lo = std::max(1, m - 6);
    double acc = 0.0;
    int cnt = 0;
    for (int k = lo; k < m; ++k) {
      double a = traj.period_states[k - 1].norm();
      double b = traj.period_states[k].norm();
      if (a > 0.0 && b > 0.0) {
        acc += std::log(b / a);
        ++cnt;
      }
    }
    out.rate_fit = cnt > 0 ? acc / cnt : 0.0;
    out.evidence = traj.period_states.back().cwiseAbs().maxCoeff();
    out.evidence_note = "final norm; fitted per-period rate in rate_fit";
    return out;
  }

  // n > 1
  if (sb.s > 1e-6) {
    Trajectory traj = integrate_split(stemcell_system(sp), Q0, periods, 1e-6);
    out.periods_run = traj.periods;
    if (!traj.reached_periodic)
      throw std::runtime_error("classify_stemcell: attractor extraction did not converge");
    out.verdict = StemVerdict::Persist;
    out.verdict_name = "persist";
    out.attractor = StateField{traj.last_period};
    out.final_period = out.attractor;
    out.has_attractor = true;
    out.evidence = traj.periodic_residual;
    out.evidence_note = "periodic residual of the extracted attractor";
    return out;
  }
  if (sb.s < -1e-6) {
    Trajectory traj = integrate_split(stemcell_system(sp), Q0, periods, 0.0);
    out.periods_run = traj.periods;
    if (!traj.last_period.empty()) out.final_period = StateField{traj.last_period};
    out.verdict = StemVerdict::Extinction;
    out.verdict_name = "extinction";
    out.evidence = traj.period_states.back().cwiseAbs().maxCoeff();
    out.evidence_note = "final norm";
    return out;
  }
  out.verdict = StemVerdict::Inconclusive;
  out.verdict_name = "inconclusive (near-critical)";
  return out;
}

IvpErrorTable nonlocal_to_local_ivp_error(const LinearIVP& ivp,
                                          const std::vector<double>& sigmas, double T) {
  double h = ivp.grid.h[0];
  for (double s : sigmas)
    for (const auto& ker : ivp.kernels.kernels)
      if (ker.support_radius * s < 2.0 * h)
        throw std::invalid_argument(
            "nonlocal_to_local_ivp_error: kernel support below 2 grid cells at sigma=" +
            std::to_string(s) + "; refine the grid");
  if (ivp.grid.dim != 1)
    throw std::invalid_argument("nonlocal_to_local_ivp_error: 1D only");

  int n = ivp.grid.n();
  int S = ivp.time.steps;
  double dt = ivp.time.dt;
  int total = static_cast<int>(std::lround(T * S));

  // local FD reference on the matching interior grid
  auto m2 = kernel_second_moment(ivp.kernels, ivp.time);
  auto dfn = ivp.d;
  auto afn = ivp.a;
  int steps = S;
  MatrixFn drfn = [dfn, m2, steps](const Point& x, double t) {
    double tt = t - std::floor(t);
    int k = std::min(static_cast<int>(tt * steps), steps - 1);
    return Eigen::MatrixXd::Constant(1, 1, dfn(x, t) * m2[0][k] / 2.0);
  };
  MatrixFn aform = [afn](const Point& x, double t) {
    return Eigen::MatrixXd::Constant(1, 1, afn(x, t));
  };
  LocalProblem lp = build_local_problem(drfn, aform, 1, ivp.tau, ivp.grid.bounds,
                                        ivp.grid.n_axis, S);
  int nloc = lp.grid.n();

  Eigen::VectorXd u0(n);
  for (int p = 0; p < n; ++p) u0[p] = ivp.u0(ivp.grid.nodes[p]);
  Eigen::VectorXd w0(nloc);
  for (int p = 0; p < nloc; ++p) w0[p] = ivp.u0(lp.grid.nodes[p]);

  // CN trajectory of the local problem, recorded at every knot
  std::vector<Eigen::VectorXd> local_traj(total + 1);
  {
    Eigen::VectorXd w = w0;
    local_traj[0] = w;
    double c = dt / (2.0 * ivp.tau);
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(nloc, nloc);
    bool lti = lp.d_r.time_independent && lp.A.time_independent;
    Eigen::MatrixXd G0 = assemble_local_dense(lp, 0.0);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu0(I - c * G0);
    for (int k = 0; k < total; ++k) {
      double t = (k % S) * dt;
      if (lti) {
        w = lu0.solve(w + c * (G0 * w));
      } else {
        Eigen::MatrixXd Ga = assemble_local_dense(lp, t);
        Eigen::MatrixXd Gb = assemble_local_dense(lp, t + dt);
        w = (I - c * Gb).partialPivLu().solve(w + c * (Ga * w));
      }
      local_traj[k + 1] = w;
    }
  }
  // interpolate the interior-node solution to the midpoint grid
  auto local_at_midpoints = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
      double left = i - 1 >= 0 && i - 1 < nloc ? w[i - 1] : 0.0;
      double right = i < nloc ? w[i] : 0.0;
      v[i] = 0.5 * (left + right);
    }
    return v;
  };

  IvpErrorTable table;
  for (double sg : sigmas) {
    OperatorSpec spec;
    spec.tau = ivp.tau;
    spec.m = 2.0;
    spec.sigma = sg;
    spec.form = CouplingForm::Scaled;
    spec.C = Eigen::MatrixXd::Ones(1, 1);
    spec.grid = ivp.grid;
    spec.time = ivp.time;
    spec.D = sample_field(
        [dfn](const Point& x, double t) { return Eigen::MatrixXd::Constant(1, 1, dfn(x, t)); },
        1, ivp.grid, ivp.time);
    spec.A = sample_field(aform, 1, ivp.grid, ivp.time);
    spec.kernels = rescale_kernel(ivp.kernels, sg);
    spec.prepare();

    double c = dt / (2.0 * ivp.tau);
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    bool lti = spec.autonomous();
    Eigen::MatrixXd G0 = assemble_dense(spec, 0.0, std::numeric_limits<int>::max());
    Eigen::PartialPivLU<Eigen::MatrixXd> lu0(I - c * G0);
    Eigen::VectorXd u = u0;
    double err = 0.0;
    for (int k = 0; k < total; ++k) {
      double t = (k % S) * dt;
      if (lti) {
        u = lu0.solve(u + c * (G0 * u));
      } else {
        Eigen::MatrixXd Ga = assemble_dense(spec, t, std::numeric_limits<int>::max());
        Eigen::MatrixXd Gb = assemble_dense(spec, t + dt, std::numeric_limits<int>::max());
        u = (I - c * Gb).partialPivLu().solve(u + c * (Ga * u));
      }
      err = std::max(err, (u - local_at_midpoints(local_traj[k + 1])).cwiseAbs().maxCoeff());
    }
    table.rows.push_back({sg, err});
  }

  // log-log slope of the error against sigma
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (const auto& row : table.rows)
    if (row.sup_error > 0.0) {
      double lx = std::log(row.sigma), ly = std::log(row.sup_error);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++m;
    }
  table.fitted_exponent = m >= 2 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : 0.0;
  table.strictly_decreasing = true;
  for (std::size_t i = 1; i < table.rows.size(); ++i)
    if (!(table.rows[i].sup_error < table.rows[i - 1].sup_error))
      table.strictly_decreasing = false;
  return table;
}

}  // namespace nls
