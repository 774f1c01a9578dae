#include "nls/operator_core.hpp"

#include <cmath>
#include <stdexcept>

namespace nls {

StateField StateField::zeros(int knots, int size) {
  StateField f;
  f.u.assign(knots, Eigen::VectorXd::Zero(size));
  return f;
}

void OperatorSpec::prepare() {
  l = A.l;
  if (D.l != l) throw std::invalid_argument("OperatorSpec: D and A have different sizes");
  if (kernels.l != l) throw std::invalid_argument("OperatorSpec: kernel count != l");
  if (form == CouplingForm::Scaled) {
    if (C.rows() != l || C.cols() != l)
      throw std::invalid_argument("OperatorSpec: C has wrong shape");
    if (!(sigma > 0.0)) throw std::invalid_argument("OperatorSpec: sigma must be positive");
    if (m < 0.0) throw std::invalid_argument("OperatorSpec: m must be >= 0");
  }
  if (!(tau > 0.0)) throw std::invalid_argument("OperatorSpec: tau must be positive");

  bool cacheable = true;
  for (const auto& ker : kernels.kernels) cacheable = cacheable && ker.time_independent;
  if (cacheable) {
    auto cache = std::make_shared<std::vector<Eigen::MatrixXd>>();
    int n = grid.n();
    cache->reserve(l);
    for (int j = 0; j < l; ++j) {
      Eigen::MatrixXd K(n, n);
      const Kernel& ker = kernels.kernels[j];
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q)
          K(p, q) = ker(grid.nodes[p], grid.nodes[q], 0.0) * grid.weights[q];
      cache->push_back(std::move(K));
    }
    kernel_cache = std::move(cache);
  } else {
    kernel_cache.reset();
  }
}

bool OperatorSpec::autonomous() const {
  bool kt = true;
  for (const auto& ker : kernels.kernels) kt = kt && ker.time_independent;
  return kt && D.time_independent && A.time_independent;
}

Eigen::MatrixXd OperatorSpec::inflow_matrix(int node, double t) const {
  if (form == CouplingForm::Raw) return D.at_time(grid, node, t);
  Eigen::MatrixXd d = D.at_time(grid, node, t);
  double scale = std::pow(sigma, -m);
  return scale * C * d.diagonal().asDiagonal();
}

Eigen::VectorXd OperatorSpec::outflow(int node, double t) const {
  if (form == CouplingForm::Raw) return Eigen::VectorXd::Zero(l);
  return std::pow(sigma, -m) * D.at_time(grid, node, t).diagonal();
}

OperatorSpec OperatorSpec::with_A(MatrixField A_new) const {
  OperatorSpec s = *this;
  s.A = std::move(A_new);
  s.prepare();
  return s;
}

OperatorSpec OperatorSpec::with_D_scale(double scale) const {
  OperatorSpec s = *this;
  MatrixField d = D;
  for (auto& knot : d.values)
    for (auto& v : knot) v *= scale;
  if (d.has_analytic) {
    auto base = D.analytic;
    d.analytic = [base, scale](const Point& x, double t) {
      return (scale * base(x, t)).eval();
    };
  }
  s.D = std::move(d);
  s.prepare();
  return s;
}

Eigen::MatrixXd kernel_matrix(const OperatorSpec& spec, int species, double t) {
  if (spec.kernel_cache) return (*spec.kernel_cache)[species];
  int n = spec.grid.n();
  Eigen::MatrixXd K(n, n);
  const Kernel& ker = spec.kernels.kernels[species];
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      K(p, q) = ker(spec.grid.nodes[p], spec.grid.nodes[q], t) * spec.grid.weights[q];
  return K;
}

Eigen::VectorXd apply_spatial(const OperatorSpec& spec, const Eigen::VectorXd& u, double t) {
  int n = spec.grid.n();
  int l = spec.l;
  if (u.size() != static_cast<Eigen::Index>(n) * l)
    throw std::invalid_argument("apply_spatial: state has wrong size");

  // P_j[u_j] per species
  Eigen::MatrixXd Pu(n, l);
  for (int j = 0; j < l; ++j) {
    Eigen::VectorXd uj(n);
    for (int p = 0; p < n; ++p) uj[p] = u[p * l + j];
    Pu.col(j) = kernel_matrix(spec, j, t) * uj;
  }

  Eigen::VectorXd out(n * l);
  for (int p = 0; p < n; ++p) {
    Eigen::MatrixXd Deff = spec.inflow_matrix(p, t);
    Eigen::MatrixXd Ap = spec.A.at_time(spec.grid, p, t);
    Eigen::VectorXd of = spec.outflow(p, t);
    for (int i = 0; i < l; ++i) {
      double acc = -of[i] * u[p * l + i];
      for (int j = 0; j < l; ++j)
        acc += Deff(i, j) * Pu(p, j) + Ap(i, j) * u[p * l + j];
      out[p * l + i] = acc;
    }
  }
  return out;
}

Eigen::MatrixXd assemble_dense(const OperatorSpec& spec, double t, int cap) {
  int n = spec.grid.n();
  int l = spec.l;
  if (n * l > cap) throw std::invalid_argument("assemble_dense: n*l exceeds cap");

  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n * l, n * l);
  std::vector<Eigen::MatrixXd> K(l);
  for (int j = 0; j < l; ++j) K[j] = kernel_matrix(spec, j, t);

  for (int p = 0; p < n; ++p) {
    Eigen::MatrixXd Deff = spec.inflow_matrix(p, t);
    Eigen::MatrixXd Ap = spec.A.at_time(spec.grid, p, t);
    Eigen::VectorXd of = spec.outflow(p, t);
    for (int i = 0; i < l; ++i) {
      for (int j = 0; j < l; ++j) {
        double dij = Deff(i, j);
        if (dij != 0.0)
          for (int q = 0; q < n; ++q) G(p * l + i, q * l + j) += dij * K[j](p, q);
        G(p * l + i, p * l + j) += Ap(i, j);
      }
      G(p * l + i, p * l + i) -= of[i];
    }
  }
  return G;
}

namespace {

// Periodic 4-point (cubic) interpolation of knot samples, O(dt^4) accurate.
Eigen::VectorXd interp_state(const std::vector<Eigen::VectorXd>& u, double t) {
  int steps = static_cast<int>(u.size()) - 1;
  double tt = t - std::floor(t);
  double s = tt * steps;
  int k = std::min(static_cast<int>(std::floor(s)), steps - 1);
  double th = s - k;
  auto wrap = [steps](int i) { return ((i % steps) + steps) % steps; };
  const Eigen::VectorXd& f0 = u[wrap(k - 1)];
  const Eigen::VectorXd& f1 = u[wrap(k)];
  const Eigen::VectorXd& f2 = u[wrap(k + 1)];
  const Eigen::VectorXd& f3 = u[wrap(k + 2)];
  double c0 = -th * (th - 1.0) * (th - 2.0) / 6.0;
  double c1 = (th + 1.0) * (th - 1.0) * (th - 2.0) / 2.0;
  double c2 = -(th + 1.0) * th * (th - 2.0) / 2.0;
  double c3 = (th + 1.0) * th * (th - 1.0) / 6.0;
  return c0 * f0 + c1 * f1 + c2 * f2 + c3 * f3;
}

}  // namespace

StateField resolvent_N(const OperatorSpec& spec, double alpha, const StateField& phi) {
  int n = spec.grid.n();
  int l = spec.l;
  int steps = spec.time.steps;
  if (phi.knots() != steps + 1)
    throw std::invalid_argument("resolvent_N: phi must be sampled at all time knots");

  StateField psi = StateField::zeros(steps + 1, n * l);
  double dt = spec.time.dt;
  double r = 1.0 / spec.tau;
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(l, l);

  // Per-node fundamental matrix Phi and particular solution b of
  // tau v' = (A - alpha I) v + phi, propagated with RK4 over one period.
  std::vector<Eigen::MatrixXd> Phi(n, I);
  std::vector<Eigen::VectorXd> b(n, Eigen::VectorXd::Zero(l));
  std::vector<Eigen::MatrixXd> A_mid(n);

  auto sample_A = [&](int p, double t) {
    return (spec.A.at_time(spec.grid, p, t) - alpha * I).eval();
  };

  for (int pass = 0; pass < 2; ++pass) {
    if (pass == 1) {
      // periodic closure, then re-propagate storing the knot values
      for (int p = 0; p < n; ++p) {
        double rho = Phi[p].eigenvalues().cwiseAbs().maxCoeff();
        if (rho >= 1.0 - 1e-12)
          throw std::invalid_argument(
              "resolvent_N: alpha is not above max lambda_A (periodic solve singular)");
        Eigen::VectorXd psi0 = (I - Phi[p]).partialPivLu().solve(b[p]);
        b[p] = psi0;
        psi.u[0].segment(p * l, l) = psi0;
      }
    }
    for (int k = 0; k < steps; ++k) {
      double t = spec.time.knots[k];
      Eigen::VectorXd phi_mid = interp_state(phi.u, t + 0.5 * dt);
      for (int p = 0; p < n; ++p) {
        Eigen::MatrixXd Ak = sample_A(p, t);
        Eigen::MatrixXd Am = sample_A(p, t + 0.5 * dt);
        Eigen::MatrixXd Ak1 = sample_A(p, t + dt);
        Eigen::VectorXd fk = phi.u[k].segment(p * l, l);
        Eigen::VectorXd fm = phi_mid.segment(p * l, l);
        Eigen::VectorXd fk1 = phi.u[k + 1].segment(p * l, l);
        if (pass == 0) {
          Eigen::MatrixXd K1 = r * (Ak * Phi[p]);
          Eigen::MatrixXd K2 = r * (Am * (Phi[p] + 0.5 * dt * K1));
          Eigen::MatrixXd K3 = r * (Am * (Phi[p] + 0.5 * dt * K2));
          Eigen::MatrixXd K4 = r * (Ak1 * (Phi[p] + dt * K3));
          Phi[p] += (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
        }
        Eigen::VectorXd v1 = r * (Ak * b[p] + fk);
        Eigen::VectorXd v2 = r * (Am * (b[p] + 0.5 * dt * v1) + fm);
        Eigen::VectorXd v3 = r * (Am * (b[p] + 0.5 * dt * v2) + fm);
        Eigen::VectorXd v4 = r * (Ak1 * (b[p] + dt * v3) + fk1);
        b[p] += (dt / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
        if (pass == 1) psi.u[k + 1].segment(p * l, l) = b[p];
      }
    }
    if (pass == 0) continue;
  }
  return psi;
}

OperatorSpec build_bc_variant(const OperatorSpec& spec, BCMode mode) {
  if (mode == BCMode::Raw) {
    OperatorSpec s = spec;
    s.bc = BCMode::Raw;
    return s;
  }
  if (spec.form != CouplingForm::Raw)
    throw std::invalid_argument("build_bc_variant: expects a raw-form spec");
  for (const auto& knot : spec.D.values)
    for (const auto& v : knot)
      if ((v - Eigen::MatrixXd(v.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > 1e-14)
        throw std::invalid_argument("build_bc_variant: strongly coupled spec rejected");
  for (const auto& ker : spec.kernels.kernels)
    if (!ker.convolution || !ker.mass_normalized)
      throw std::invalid_argument("build_bc_variant: kernels must be mass-normalized");

  int l = spec.l;
  int n = spec.grid.n();
  int steps = spec.time.steps;

  // Neumann retains only the kernel mass over Omega: integral of k_i(y, x, t) dy.
  std::vector<std::vector<Eigen::VectorXd>> mass(steps + 1,
                                                 std::vector<Eigen::VectorXd>());
  if (mode == BCMode::Neumann) {
    bool kt = true;
    for (const auto& ker : spec.kernels.kernels) kt = kt && ker.time_independent;
    for (int k = 0; k <= steps; ++k) {
      if (kt && k > 0) {
        mass[k] = mass[0];
        continue;
      }
      mass[k].assign(n, Eigen::VectorXd::Zero(l));
      for (int i = 0; i < l; ++i) {
        const Kernel& ker = spec.kernels.kernels[i];
        for (int p = 0; p < n; ++p) {
          double acc = 0.0;
          for (int q = 0; q < n; ++q)
            acc += ker(spec.grid.nodes[q], spec.grid.nodes[p], spec.time.knots[k]) *
                   spec.grid.weights[q];
          mass[k][p][i] = acc;
        }
      }
    }
  }

  std::vector<std::vector<Eigen::MatrixXd>> vals(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    vals[k].reserve(n);
    for (int p = 0; p < n; ++p) {
      Eigen::MatrixXd a = spec.A.values[k][p];
      Eigen::VectorXd d = spec.D.values[k][p].diagonal();
      for (int i = 0; i < l; ++i) {
        if (mode == BCMode::Dirichlet)
          a(i, i) += -d[i];
        else
          a(i, i) += -d[i] * mass[k][p][i];
      }
      vals[k].push_back(std::move(a));
    }
  }

  OperatorSpec out = spec;
  out.A = tabulated_field(std::move(vals), l);
  out.bc = mode;
  out.prepare();
  return out;
}

}  // namespace nls
