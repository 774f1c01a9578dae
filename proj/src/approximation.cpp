#include "nls/approximation.hpp"

#include <cmath>
#include <stdexcept>

namespace nls {

double smooth_chi(double s) { return s <= 0.0 ? 0.0 : std::exp(-1.0 / s); }

double smooth_step(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  double a = smooth_chi(s);
  return a / (a + smooth_chi(1.0 - s));
}

double smooth_pospart(double s) { return s * smooth_step(s); }

namespace {

double bump(double r) { return std::abs(r) < 1.0 ? std::exp(1.0 / (r * r - 1.0)) : 0.0; }

}  // namespace

MollifierSpec make_mollifier(double epsilon, int dim) {
  if (!(epsilon > 0.0 && epsilon < 1.0 / 3.0))
    throw std::invalid_argument("make_mollifier: epsilon must lie in (0, 1/3)");
  MollifierSpec ms;
  ms.epsilon = epsilon;
  int m = 20000;
  double h = 2.0 / m;
  double mass1 = 0.0;
  for (int i = 0; i < m; ++i) mass1 += bump(-1.0 + (i + 0.5) * h) * h;
  ms.C1 = 1.0 / mass1;
  if (dim == 1) {
    ms.C2 = ms.C1;
  } else {
    double mass2 = 0.0;
    double hr = 1.0 / m;
    for (int i = 0; i < m; ++i) {
      double r = (i + 0.5) * hr;
      mass2 += bump(r) * 2.0 * M_PI * r * hr;
    }
    ms.C2 = 1.0 / mass2;
  }
  return ms;
}

namespace {

// Row-normalized discrete mollification stencils: unit mass by construction,
// so constants reproduce exactly and entrywise order is preserved.
struct Stencils {
  // time: symmetric window, periodic wrap
  std::vector<double> tw;
  int twin = 0;
  // space: per target node, (source node, weight) with constant extension
  std::vector<std::vector<std::pair<int, double>>> sp;
};

Stencils build_stencils(double epsilon, const SpatialGrid& grid, const TimeGrid& tg) {
  Stencils st;
  // time
  int wt = static_cast<int>(std::floor(epsilon / tg.dt));
  st.twin = wt;
  st.tw.assign(2 * wt + 1, 0.0);
  double acc = 0.0;
  for (int m = -wt; m <= wt; ++m) {
    double v = bump(m * tg.dt / epsilon);
    st.tw[m + wt] = v;
    acc += v;
  }
  for (auto& v : st.tw) v /= acc;

  // space
  int n = grid.n();
  st.sp.resize(n);
  if (grid.dim == 1) {
    double h = grid.h[0];
    int w = static_cast<int>(std::floor(epsilon / h));
    for (int p = 0; p < n; ++p) {
      double tot = 0.0;
      std::vector<std::pair<int, double>> row;
      for (int j = -w; j <= w; ++j) {
        double v = bump(j * h / epsilon);
        if (v <= 0.0) continue;
        int src = std::clamp(p + j, 0, n - 1);
        row.emplace_back(src, v);
        tot += v;
      }
      for (auto& e : row) e.second /= tot;
      st.sp[p] = std::move(row);
    }
  } else {
    int nx = grid.n_axis[0], ny = grid.n_axis[1];
    double hx = grid.h[0], hy = grid.h[1];
    int wx = static_cast<int>(std::floor(epsilon / hx));
    int wy = static_cast<int>(std::floor(epsilon / hy));
    for (int p = 0; p < n; ++p) {
      int ix = p % nx, iy = p / nx;
      double tot = 0.0;
      std::vector<std::pair<int, double>> row;
      for (int jy = -wy; jy <= wy; ++jy)
        for (int jx = -wx; jx <= wx; ++jx) {
          double r = std::sqrt(jx * hx * jx * hx + jy * hy * jy * hy) / epsilon;
          double v = bump(r);
          if (v <= 0.0) continue;
          int sx = std::clamp(ix + jx, 0, nx - 1);
          int sy = std::clamp(iy + jy, 0, ny - 1);
          row.emplace_back(sy * nx + sx, v);
          tot += v;
        }
      for (auto& e : row) e.second /= tot;
      st.sp[p] = std::move(row);
    }
  }
  return st;
}

// scalar lattice [knot][node], periodic in the knot index
using Lattice = std::vector<std::vector<double>>;

Lattice apply_stencils(const Stencils& st, const Lattice& a) {
  int knots = static_cast<int>(a.size());
  int steps = knots - 1;
  int n = static_cast<int>(a[0].size());
  Lattice tmp(knots, std::vector<double>(n, 0.0));
  auto wrap = [steps](int k) { return ((k % steps) + steps) % steps; };
  for (int k = 0; k < steps; ++k)
    for (int p = 0; p < n; ++p) {
      double acc = 0.0;
      for (int m = -st.twin; m <= st.twin; ++m)
        acc += st.tw[m + st.twin] * a[wrap(k + m)][p];
      tmp[k][p] = acc;
    }
  tmp[steps] = tmp[0];
  Lattice out(knots, std::vector<double>(n, 0.0));
  for (int k = 0; k < knots; ++k)
    for (int p = 0; p < n; ++p) {
      double acc = 0.0;
      for (const auto& [src, wgt] : st.sp[p]) acc += wgt * tmp[k][src];
      out[k][p] = acc;
    }
  return out;
}

Lattice entry_lattice(const MatrixField& f, int i, int j) {
  Lattice a(f.knots(), std::vector<double>(f.n_nodes()));
  for (int k = 0; k < f.knots(); ++k)
    for (int p = 0; p < f.n_nodes(); ++p) a[k][p] = f.values[k][p](i, j);
  return a;
}

double lattice_max_diff(const Lattice& a, const Lattice& b) {
  double d = 0.0;
  for (std::size_t k = 0; k + 1 < a.size(); ++k)
    for (std::size_t p = 0; p < a[k].size(); ++p)
      d = std::max(d, std::abs(a[k][p] - b[k][p]));
  return d;
}

}  // namespace

MollifyResult mollify_periodic(const MatrixField& field, double epsilon,
                               const SpatialGrid& grid, const TimeGrid& tg) {
  if (!(epsilon > 0.0 && epsilon < 1.0 / 3.0))
    throw std::invalid_argument("mollify_periodic: epsilon must lie in (0, 1/3)");
  Stencils st = build_stencils(epsilon, grid, tg);
  int l = field.l;
  MollifyResult out;
  out.delta = Eigen::MatrixXd::Zero(l, l);

  std::vector<std::vector<Eigen::MatrixXd>> vals(
      field.knots(), std::vector<Eigen::MatrixXd>(field.n_nodes(), Eigen::MatrixXd::Zero(l, l)));
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j) {
      Lattice a = entry_lattice(field, i, j);
      Lattice b = apply_stencils(st, a);
      out.delta(i, j) = lattice_max_diff(a, b);
      for (int k = 0; k < field.knots(); ++k)
        for (int p = 0; p < field.n_nodes(); ++p) vals[k][p](i, j) = b[k][p];
    }
  out.field = tabulated_field(std::move(vals), l);
  out.delta_max = out.delta.maxCoeff();
  return out;
}

ApproxSequence lower_upper_sequences(const MatrixField& A, int n_levels,
                                     const SpatialGrid& grid, const TimeGrid& tg,
                                     double eps0) {
  ApproxSequence seq;
  int l = A.l;
  int knots = A.knots();
  int n = A.n_nodes();

  for (int lev = 0; lev < n_levels; ++lev) {
    ApproxLevel level;
    level.epsilon = eps0 * std::pow(2.0, -lev);
    MollifyResult mr = mollify_periodic(A, level.epsilon, grid, tg);
    level.delta = mr.delta;
    level.delta_max = mr.delta_max;
    double eta = std::max(mr.delta_max, 1e-14);

    std::vector<std::vector<Eigen::MatrixXd>> lower(
        knots, std::vector<Eigen::MatrixXd>(n, Eigen::MatrixXd::Zero(l, l)));
    std::vector<std::vector<Eigen::MatrixXd>> upper = lower;

    Stencils base_st = build_stencils(level.epsilon, grid, tg);
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < l; ++j) {
        double dij = mr.delta(i, j);
        for (int k = 0; k < knots; ++k)
          for (int p = 0; p < n; ++p)
            upper[k][p](i, j) = mr.field.values[k][p](i, j) + dij;
        if (i == j) {
          for (int k = 0; k < knots; ++k)
            for (int p = 0; p < n; ++p)
              lower[k][p](i, i) = mr.field.values[k][p](i, i) - dij;
          continue;
        }
        // off-diagonal lower chain: clip, re-mollify, shift, smooth positive part
        Lattice c(knots, std::vector<double>(n));
        for (int k = 0; k < knots; ++k)
          for (int p = 0; p < n; ++p)
            c[k][p] = std::max(mr.field.values[k][p](i, j) - 2.0 * dij, 0.0);
        Lattice u = c;
        double gamma = level.epsilon;
        for (int tries = 0; tries < 20; ++tries) {
          Stencils gst = build_stencils(gamma, grid, tg);
          u = apply_stencils(gst, c);
          if (lattice_max_diff(u, c) <= dij + 1e-15) break;
          gamma *= 0.5;
          ++level.gamma_halvings;
        }
        double alpha = 0.0;
        for (int k = 0; k + 1 < knots; ++k)
          for (int p = 0; p < n; ++p) alpha = std::max(alpha, u[k][p] - c[k][p]);
        for (int k = 0; k < knots; ++k)
          for (int p = 0; p < n; ++p) {
            double v = u[k][p] - alpha;
            lower[k][p](i, j) = eta * smooth_pospart(v / eta);
          }
      }

    level.A_lower = tabulated_field(std::move(lower), l);
    level.A_upper = tabulated_field(std::move(upper), l);
    seq.levels.push_back(std::move(level));
  }
  return seq;
}

FlattenResult flatten_at_max(const MatrixField& A_minus, double eps_k, double r_k, double tau,
                             const SpatialGrid& grid, const TimeGrid& tg) {
  FlattenResult out;
  LambdaAProfile prof = lambda_A_profile(A_minus, tau, grid, tg);
  int n = grid.n();
  double mx = prof.max_lambda;
  double scale = std::max(1.0, std::abs(mx));
  out.lambda_orig = prof.lambda;
  out.argmax = prof.argmax;

  Eigen::VectorXd lam_flat(n);
  if (prof.lambda.maxCoeff() - prof.lambda.minCoeff() <= 1e-12 * scale) {
    // already flat: uniform downward shift
    lam_flat.setConstant(mx - eps_k);
    out.r_used = r_k;
  } else {
    // shrink the radius until lambda >= max - eps on the whole ball
    double r_eff = r_k;
    const Point& xstar = grid.nodes[prof.argmax];
    for (int p = 0; p < n; ++p) {
      double d = dist(grid.nodes[p], xstar, grid.dim);
      if (d <= r_eff && prof.lambda[p] < mx - eps_k) r_eff = std::min(r_eff, d * (1.0 - 1e-12));
    }
    out.r_used = r_eff;
    for (int p = 0; p < n; ++p) {
      double d = dist(grid.nodes[p], xstar, grid.dim);
      double rho = r_eff > 0.0 ? smooth_step(2.0 - 2.0 * d / r_eff) : (p == prof.argmax ? 1.0 : 0.0);
      lam_flat[p] = (mx - eps_k) * rho + (prof.lambda[p] - 2.0 * eps_k) * (1.0 - rho);
    }
  }
  out.lambda_flat = lam_flat;
  out.beta = lam_flat - prof.lambda;

  std::vector<std::vector<Eigen::MatrixXd>> vals(A_minus.knots());
  for (int k = 0; k < A_minus.knots(); ++k) {
    vals[k].reserve(n);
    for (int p = 0; p < n; ++p) {
      Eigen::MatrixXd v = A_minus.values[k][p];
      for (int i = 0; i < A_minus.l; ++i) v(i, i) += out.beta[p];
      vals[k].push_back(std::move(v));
    }
  }
  out.A_tilde = tabulated_field(std::move(vals), A_minus.l);
  return out;
}

OperatorSpec spec_with_local_part(const OperatorSpec& spec, const MatrixField& B) {
  int n = spec.grid.n();
  std::vector<std::vector<Eigen::MatrixXd>> vals(spec.time.steps + 1);
  for (int k = 0; k <= spec.time.steps; ++k) {
    vals[k].reserve(n);
    for (int p = 0; p < n; ++p) {
      Eigen::MatrixXd a = B.values[k][p];
      Eigen::VectorXd of = spec.outflow(p, spec.time.knots[k]);
      for (int i = 0; i < spec.l; ++i) a(i, i) += of[i];
      vals[k].push_back(std::move(a));
    }
  }
  return spec.with_A(tabulated_field(std::move(vals), spec.l));
}

SandwichTable sandwich_check(const OperatorSpec& spec, int n_levels, double eps0,
                             const SteppingOptions& opts) {
  SandwichTable table;
  MatrixField B = local_part_field(spec);
  double s_mid = spectral_bound(spec, opts).s;
  table.sequence = lower_upper_sequences(B, n_levels, spec.grid, spec.time, eps0);

  double prev_gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_levels; ++k) {
    ApproxLevel& level = table.sequence.levels[k];
    FlattenResult fl = flatten_at_max(level.A_lower, level.epsilon, level.epsilon, spec.tau,
                                      spec.grid, spec.time);
    level.A_lower_flat = fl.A_tilde;
    level.beta = fl.beta;
    level.lambda_lower = fl.lambda_orig;
    level.lambda_flat = fl.lambda_flat;
    level.argmax = fl.argmax;
    level.r = fl.r_used;

    OperatorSpec lo = spec_with_local_part(spec, level.A_lower_flat);
    OperatorSpec hi = spec_with_local_part(spec, level.A_upper);

    SandwichRow row;
    row.level = k;
    row.epsilon = level.epsilon;
    row.delta_max = level.delta_max;
    row.s_lower = spectral_bound(lo, opts).s;
    row.s_mid = s_mid;
    row.s_upper = spectral_bound(hi, opts).s;
    row.gap = row.s_upper - row.s_lower;
    row.nonintegrable_flag = contact_exponent_fit(fl.lambda_flat, spec.grid).flag;
    if (row.s_lower > s_mid + 1e-7 || s_mid > row.s_upper + 1e-7) table.sandwich_ok = false;
    if (row.gap > prev_gap + 1e-12) table.gaps_shrinking = false;
    prev_gap = row.gap;
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace nls
