#include "nls/local_limit.hpp"

#include <cmath>
#include <stdexcept>

namespace nls {

namespace {

SpatialGrid interior_grid(const Box& bounds, std::array<int, 2> cells) {
  SpatialGrid g;
  g.dim = bounds.dim;
  g.bounds = bounds;
  g.rule = QuadratureRule::Trapezoid;
  if (bounds.dim == 1) {
    int m = cells[0];
    if (m < 10) throw std::invalid_argument("local problem: need >= 10 cells per axis");
    double h = (bounds.hi[0] - bounds.lo[0]) / m;
    g.h = {h, 0.0};
    g.n_axis = {m - 1, 0};
    g.weights.resize(m - 1);
    for (int i = 1; i < m; ++i) {
      g.nodes.push_back({bounds.lo[0] + i * h, 0.0});
      g.weights[i - 1] = h;
    }
  } else {
    int mx = cells[0], my = cells[1];
    if (mx < 10 || my < 10)
      throw std::invalid_argument("local problem: need >= 10 cells per axis");
    double hx = (bounds.hi[0] - bounds.lo[0]) / mx;
    double hy = (bounds.hi[1] - bounds.lo[1]) / my;
    g.h = {hx, hy};
    g.n_axis = {mx - 1, my - 1};
    g.weights.resize((mx - 1) * (my - 1));
    Eigen::Index idx = 0;
    for (int j = 1; j < my; ++j)
      for (int i = 1; i < mx; ++i) {
        g.nodes.push_back({bounds.lo[0] + i * hx, bounds.lo[1] + j * hy});
        g.weights[idx++] = hx * hy;
      }
  }
  return g;
}

}  // namespace

LocalProblem build_local_problem(const MatrixFn& d_r, const MatrixFn& A, int l, double tau,
                                 const Box& bounds, std::array<int, 2> cells, int steps) {
  LocalProblem lp;
  lp.l = l;
  lp.dim = bounds.dim;
  lp.bounds = bounds;
  lp.cells = cells;
  lp.tau = tau;
  lp.grid = interior_grid(bounds, cells);
  lp.time = build_time_grid(steps);
  lp.d_r = sample_field(d_r, l, lp.grid, lp.time);
  lp.A = sample_field(A, l, lp.grid, lp.time);
  for (const auto& knot : lp.d_r.values)
    for (const auto& v : knot)
      for (int i = 0; i < l; ++i)
        if (!(v(i, i) > 0.0))
          throw std::invalid_argument("local problem: diffusivity must be positive");
  return lp;
}

MatrixField effective_diffusivity(const KernelSet& kernels, const MatrixField& d_field,
                                  const SpatialGrid& grid, const TimeGrid& tg) {
  auto m2 = kernel_second_moment(kernels, tg);
  int l = d_field.l;
  int N = kernels.dim;
  std::vector<std::vector<Eigen::MatrixXd>> vals(d_field.knots());
  for (int k = 0; k < d_field.knots(); ++k) {
    vals[k].reserve(d_field.n_nodes());
    for (int p = 0; p < d_field.n_nodes(); ++p) {
      Eigen::MatrixXd v = Eigen::MatrixXd::Zero(l, l);
      for (int i = 0; i < l; ++i)
        v(i, i) = d_field.values[k][p](i, i) * m2[i][k] / (2.0 * N);
      vals[k].push_back(std::move(v));
    }
  }
  (void)grid;
  return tabulated_field(std::move(vals), l);
}

Eigen::MatrixXd assemble_local_dense(const LocalProblem& lp, double t) {
  int l = lp.l;
  int n = lp.grid.n();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n * l, n * l);

  if (lp.dim == 1) {
    double h2 = lp.grid.h[0] * lp.grid.h[0];
    for (int p = 0; p < n; ++p) {
      Eigen::MatrixXd dr = lp.d_r.at_time(lp.grid, p, t);
      Eigen::MatrixXd Ap = lp.A.at_time(lp.grid, p, t);
      for (int i = 0; i < l; ++i) {
        double d = dr(i, i) / h2;
        G(p * l + i, p * l + i) += -2.0 * d;
        if (p > 0) G(p * l + i, (p - 1) * l + i) += d;
        if (p + 1 < n) G(p * l + i, (p + 1) * l + i) += d;
        for (int j = 0; j < l; ++j) G(p * l + i, p * l + j) += Ap(i, j);
      }
    }
  } else {
    int nx = lp.grid.n_axis[0];
    int ny = lp.grid.n_axis[1];
    double hx2 = lp.grid.h[0] * lp.grid.h[0];
    double hy2 = lp.grid.h[1] * lp.grid.h[1];
    for (int p = 0; p < n; ++p) {
      int ix = p % nx, iy = p / nx;
      Eigen::MatrixXd dr = lp.d_r.at_time(lp.grid, p, t);
      Eigen::MatrixXd Ap = lp.A.at_time(lp.grid, p, t);
      for (int i = 0; i < l; ++i) {
        double d = dr(i, i);
        G(p * l + i, p * l + i) += -2.0 * d / hx2 - 2.0 * d / hy2;
        if (ix > 0) G(p * l + i, (p - 1) * l + i) += d / hx2;
        if (ix + 1 < nx) G(p * l + i, (p + 1) * l + i) += d / hx2;
        if (iy > 0) G(p * l + i, (p - nx) * l + i) += d / hy2;
        if (iy + 1 < ny) G(p * l + i, (p + nx) * l + i) += d / hy2;
        for (int j = 0; j < l; ++j) G(p * l + i, p * l + j) += Ap(i, j);
      }
    }
  }
  return G;
}

LocalProblem local_problem_from_spec(const OperatorSpec& base) {
  if (base.form != CouplingForm::Scaled)
    throw std::invalid_argument("local_problem_from_spec: scaled-form spec required");
  if (!base.D.has_analytic || !base.A.has_analytic)
    throw std::invalid_argument(
        "local_problem_from_spec: closed-form coefficients required");
  auto m2 = kernel_second_moment(base.kernels, base.time);
  int N = base.kernels.dim;
  int steps = base.time.steps;
  int l = base.l;
  auto dfn = base.D.analytic;
  MatrixFn drfn = [dfn, m2, N, steps, l](const Point& x, double t) {
    double tt = t - std::floor(t);
    int k = std::min(static_cast<int>(tt * steps), steps - 1);
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(l, l);
    Eigen::VectorXd d = dfn(x, t).diagonal();
    for (int i = 0; i < l; ++i) v(i, i) = d[i] * m2[i][k] / (2.0 * N);
    return v;
  };
  return build_local_problem(drfn, base.A.analytic, l, base.tau, base.grid.bounds,
                             base.grid.n_axis, steps);
}

SpectralResult local_principal_eigen(const LocalProblem& lp, const SteppingOptions& opts) {
  LinearPeriodicSystem sys;
  sys.assemble = [&lp](double t) { return assemble_local_dense(lp, t); };
  sys.tau = lp.tau;
  sys.size = lp.grid.n() * lp.l;
  sys.autonomous = lp.d_r.time_independent && lp.A.time_independent;
  sys.base_steps = lp.time.steps;
  SteppingOptions o = opts;
  if (o.stepper == Stepper::Auto) o.stepper = Stepper::CrankNicolson;
  return system_spectral_bound(sys, o);
}

}  // namespace nls
