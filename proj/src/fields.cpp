#include "nls/fields.hpp"

#include <cmath>
#include <stdexcept>

namespace nls {

namespace {

constexpr double kZeroTol = 1e-14;

double sq(double v) { return v * v; }

}  // namespace

Eigen::MatrixXd MatrixField::at_time(const SpatialGrid& grid, int node, double t) const {
  if (has_analytic) return analytic(grid.nodes[node], t);
  if (time_independent) return values[0][node];
  int steps = knots() - 1;
  double tt = t - std::floor(t);
  double u = tt * steps;
  int k = std::min(static_cast<int>(u), steps - 1);
  double theta = u - k;
  return (1.0 - theta) * values[k][node] + theta * values[k + 1][node];
}

double MatrixField::max_abs() const {
  double m = 0.0;
  for (const auto& knot : values)
    for (const auto& v : knot) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

MatrixField sample_field(const MatrixFn& spec, int l, const SpatialGrid& grid,
                         const TimeGrid& tg, double periodicity_tol) {
  MatrixField f;
  f.l = l;
  f.analytic = spec;
  f.has_analytic = true;
  f.values.resize(tg.steps + 1);
  for (int k = 0; k < tg.steps; ++k) {
    f.values[k].reserve(grid.n());
    for (int p = 0; p < grid.n(); ++p) {
      Eigen::MatrixXd v = spec(grid.nodes[p], tg.knots[k]);
      if (v.rows() != l || v.cols() != l)
        throw std::invalid_argument("sample_field: spec returned wrong shape");
      f.values[k].push_back(std::move(v));
    }
  }
  for (int p = 0; p < grid.n(); ++p) {
    Eigen::MatrixXd end = spec(grid.nodes[p], 1.0);
    if ((end - f.values[0][p]).cwiseAbs().maxCoeff() > periodicity_tol)
      throw std::invalid_argument("sample_field: spec is not 1-periodic in t");
  }
  f.values[tg.steps] = f.values[0];

  f.time_independent = true;
  double scale = std::max(1.0, f.max_abs());
  for (int k = 1; k <= tg.steps && f.time_independent; ++k)
    for (int p = 0; p < grid.n(); ++p)
      if ((f.values[k][p] - f.values[0][p]).cwiseAbs().maxCoeff() > kZeroTol * scale) {
        f.time_independent = false;
        break;
      }
  return f;
}

MatrixField constant_field(const Eigen::MatrixXd& value, const SpatialGrid& grid,
                           const TimeGrid& tg) {
  Eigen::MatrixXd v = value;
  return sample_field([v](const Point&, double) { return v; }, static_cast<int>(value.rows()),
                      grid, tg);
}

MatrixField tabulated_field(std::vector<std::vector<Eigen::MatrixXd>> values, int l) {
  MatrixField f;
  f.l = l;
  f.values = std::move(values);
  f.has_analytic = false;
  if (f.values.empty()) throw std::invalid_argument("tabulated_field: empty");
  f.values.back() = f.values.front();
  f.time_independent = f.values.size() <= 2;
  double scale = std::max(1.0, f.max_abs());
  if (!f.time_independent) {
    f.time_independent = true;
    for (std::size_t k = 1; k + 1 < f.values.size() && f.time_independent; ++k)
      for (std::size_t p = 0; p < f.values[0].size(); ++p)
        if ((f.values[k][p] - f.values[0][p]).cwiseAbs().maxCoeff() > kZeroTol * scale) {
          f.time_independent = false;
          break;
        }
  }
  return f;
}

namespace {

Kernel make_radial(int dim, std::function<double(double)> radial, double support) {
  Kernel ker;
  ker.convolution = true;
  ker.sigma = 1.0;
  ker.support_radius = support;
  ker.time_independent = true;
  ker.mass_normalized = true;
  auto prof = [dim, radial](const Point& z, double) {
    double r = dim == 1 ? std::abs(z.x) : std::sqrt(sq(z.x) + sq(z.y));
    return radial(r);
  };
  ker.profile = prof;
  ker.k = [prof](const Point& x, const Point& y, double t) {
    return prof({x.x - y.x, x.y - y.y}, t);
  };
  return ker;
}

}  // namespace

Kernel kernel_uniform(int dim) {
  double c = dim == 1 ? 0.5 : 1.0 / M_PI;
  // half-value at the support edge so that grid-aligned sampling integrates exactly
  return make_radial(dim, [c](double r) {
    if (r < 1.0 - kZeroTol) return c;
    if (r <= 1.0 + kZeroTol) return 0.5 * c;
    return 0.0;
  }, 1.0);
}

Kernel kernel_triangle(int dim) {
  double c = dim == 1 ? 1.0 : 3.0 / M_PI;
  return make_radial(dim, [c](double r) { return r >= 1.0 ? 0.0 : c * (1.0 - r); }, 1.0);
}

Kernel kernel_truncated_gaussian(int dim) {
  double c;
  if (dim == 1) {
    c = 1.0 / (std::sqrt(M_PI / 8.0) * std::erf(std::sqrt(8.0)));
  } else {
    c = 8.0 / (M_PI * (1.0 - std::exp(-8.0)));
  }
  return make_radial(dim, [c](double r) { return r > 1.0 ? 0.0 : c * std::exp(-8.0 * r * r); },
                     1.0);
}

Kernel kernel_constant(double value) {
  Kernel ker;
  ker.convolution = false;
  ker.time_independent = true;
  ker.mass_normalized = false;
  ker.k = [value](const Point&, const Point&, double) { return value; };
  return ker;
}

Kernel kernel_rank_one(std::function<double(const Point&)> f,
                       std::function<double(const Point&)> g) {
  Kernel ker;
  ker.convolution = false;
  ker.time_independent = true;
  ker.mass_normalized = false;
  ker.k = [f, g](const Point& x, const Point& y, double) { return f(x) * g(y); };
  return ker;
}

KernelSet rescale_kernel(const KernelSet& ks, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("rescale_kernel: sigma must be positive");
  KernelSet out;
  out.l = ks.l;
  out.dim = ks.dim;
  for (const auto& base : ks.kernels) {
    if (!base.convolution)
      throw std::invalid_argument("rescale_kernel: kernel is not in convolution form");
    Kernel ker = base;
    int N = ks.dim;
    auto old_profile = base.profile;
    double scale = std::pow(sigma, -N);
    ker.profile = [old_profile, sigma, scale](const Point& z, double t) {
      return scale * old_profile({z.x / sigma, z.y / sigma}, t);
    };
    auto prof = ker.profile;
    ker.k = [prof](const Point& x, const Point& y, double t) {
      return prof({x.x - y.x, x.y - y.y}, t);
    };
    ker.sigma = base.sigma * sigma;
    ker.support_radius = base.support_radius * sigma;
    out.kernels.push_back(std::move(ker));
  }
  return out;
}

namespace {

// Quadrature of profile(z,t)*w(|z|) over R^N for compactly supported kernels.
// Cells are aligned with the support edge; the box extends to 1.5x the support.
double kernel_integral(const Kernel& ker, int dim, double t,
                       const std::function<double(double)>& weight) {
  if (!std::isfinite(ker.support_radius))
    throw std::invalid_argument("kernel moment: non-compact kernel not supported");
  double R = ker.support_radius;
  if (dim == 1) {
    int m = 60000;  // multiple of 3: support edge lands on a cell boundary
    double h = 3.0 * R / m;
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
      double z = -1.5 * R + (i + 0.5) * h;
      acc += ker.profile({z, 0.0}, t) * weight(std::abs(z)) * h;
    }
    return acc;
  }
  // 2D: radial rule along the x-axis (all built-in kernels are radial)
  int m = 60000;
  double h = 1.5 * R / m;
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    double r = (i + 0.5) * h;
    acc += ker.profile({r, 0.0}, t) * weight(r) * 2.0 * M_PI * r * h;
  }
  return acc;
}

}  // namespace

std::vector<Eigen::VectorXd> kernel_second_moment(const KernelSet& ks, const TimeGrid& tg) {
  std::vector<Eigen::VectorXd> out(ks.l);
  for (int i = 0; i < ks.l; ++i) {
    const Kernel& ker = ks.kernels[i];
    if (!ker.convolution)
      throw std::invalid_argument("kernel_second_moment: kernel is not in convolution form");
    out[i].resize(tg.steps + 1);
    if (ker.time_independent) {
      double v = kernel_integral(ker, ks.dim, 0.0, [](double r) { return r * r; });
      out[i].setConstant(v);
    } else {
      for (int k = 0; k <= tg.steps; ++k)
        out[i][k] = kernel_integral(ker, ks.dim, tg.knots[k], [](double r) { return r * r; });
    }
  }
  return out;
}

std::vector<Eigen::VectorXd> kernel_mass(const KernelSet& ks, const TimeGrid& tg) {
  std::vector<Eigen::VectorXd> out(ks.l);
  for (int i = 0; i < ks.l; ++i) {
    const Kernel& ker = ks.kernels[i];
    if (!ker.convolution)
      throw std::invalid_argument("kernel_mass: kernel is not in convolution form");
    out[i].resize(tg.steps + 1);
    if (ker.time_independent) {
      double v = kernel_integral(ker, ks.dim, 0.0, [](double) { return 1.0; });
      out[i].setConstant(v);
    } else {
      for (int k = 0; k <= tg.steps; ++k)
        out[i][k] = kernel_integral(ker, ks.dim, tg.knots[k], [](double) { return 1.0; });
    }
  }
  return out;
}

bool matrix_irreducible(const Eigen::MatrixXd& M, double zero_tol) {
  int l = static_cast<int>(M.rows());
  if (l == 1) return true;  // no nonempty proper subset exists
  // reachability closure on the nonzero pattern
  std::vector<uint32_t> reach(l, 0);
  for (int i = 0; i < l; ++i) {
    reach[i] |= 1u << i;
    for (int j = 0; j < l; ++j)
      if (std::abs(M(i, j)) >= zero_tol) reach[i] |= 1u << j;
  }
  for (int pass = 0; pass < l; ++pass) {
    bool changed = false;
    for (int i = 0; i < l; ++i) {
      uint32_t r = reach[i];
      for (int j = 0; j < l; ++j)
        if (r & (1u << j)) r |= reach[j];
      if (r != reach[i]) {
        reach[i] = r;
        changed = true;
      }
    }
    if (!changed) break;
  }
  uint32_t full = (l >= 32) ? ~0u : ((1u << l) - 1);
  for (int i = 0; i < l; ++i)
    if ((reach[i] & full) != full) return false;
  return true;
}

bool field_irreducible(const MatrixField& F, double zero_tol) {
  for (const auto& knot : F.values)
    for (const auto& v : knot)
      if (!matrix_irreducible(v, zero_tol)) return false;
  return true;
}

StructureReport check_structure(const MatrixField& D, const MatrixField& A,
                                const MatrixField& D0, const Eigen::MatrixXd& C,
                                const KernelSet& kernels, const SpatialGrid& grid,
                                const TimeGrid& tg) {
  StructureReport rep;
  int l = D.l;

  rep.rates_ok = true;
  for (const auto& knot : D.values)
    for (const auto& v : knot) {
      if (v.minCoeff() < -kZeroTol) rep.rates_ok = false;
      for (int i = 0; i < l; ++i)
        if (!(v(i, i) > 0.0)) rep.rates_ok = false;
    }

  rep.cooperative = true;
  for (const auto& knot : A.values)
    for (const auto& v : knot)
      for (int i = 0; i < l; ++i)
        for (int j = 0; j < l; ++j)
          if (i != j && v(i, j) < -kZeroTol) rep.cooperative = false;

  rep.D_irreducible = field_irreducible(D);
  rep.A_irreducible = field_irreducible(A);
  rep.irreducible = rep.cooperative && (rep.D_irreducible || rep.A_irreducible);

  // kernels: nonnegative on a node-pair subsample, k(x,x,t) > 0 everywhere
  rep.kernels_ok = true;
  int n = grid.n();
  int stride = std::max(1, n / 24);
  std::vector<double> tsamp = {0.0, tg.knots[tg.steps / 3], tg.knots[(2 * tg.steps) / 3]};
  for (int i = 0; i < kernels.l && rep.kernels_ok; ++i) {
    const Kernel& ker = kernels.kernels[i];
    for (double t : tsamp) {
      for (int p = 0; p < n; p += stride)
        for (int q = 0; q < n; q += stride)
          if (ker(grid.nodes[p], grid.nodes[q], t) < -kZeroTol) rep.kernels_ok = false;
    }
    for (int k = 0; k <= tg.steps && rep.kernels_ok; ++k)
      for (int p = 0; p < n; ++p)
        if (!(ker(grid.nodes[p], grid.nodes[p], tg.knots[k]) > 0.0)) {
          rep.kernels_ok = false;
          break;
        }
  }

  // D = C * D0 at every sample
  rep.factorized = rep.rates_ok;
  double scale = std::max(1.0, D.max_abs());
  for (std::size_t k = 0; k < D.values.size() && rep.factorized; ++k)
    for (std::size_t p = 0; p < D.values[k].size(); ++p)
      if ((D.values[k][p] - C * D0.values[k][p]).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        rep.factorized = false;
        break;
      }

  // convolution form with unit mass per knot
  rep.normalized_convolution = rep.kernels_ok;
  for (const auto& ker : kernels.kernels)
    if (!ker.convolution || !ker.mass_normalized) rep.normalized_convolution = false;
  if (rep.normalized_convolution) {
    auto mass = kernel_mass(kernels, tg);
    for (const auto& mi : mass)
      if ((mi.array() - 1.0).abs().maxCoeff() > 1e-8) rep.normalized_convolution = false;
  }

  rep.dirichlet = rep.factorized && rep.normalized_convolution &&
               (C - Eigen::MatrixXd::Identity(l, l)).cwiseAbs().maxCoeff() <= kZeroTol;

  // D, D0 constant in (x,t), D symmetric, diag D = D0
  rep.constant_symmetric_rates = rep.rates_ok;
  {
    const Eigen::MatrixXd& d00 = D.values[0][0];
    for (const auto& knot : D.values)
      for (const auto& v : knot)
        if ((v - d00).cwiseAbs().maxCoeff() > kZeroTol * scale) rep.constant_symmetric_rates = false;
    const Eigen::MatrixXd& e00 = D0.values[0][0];
    for (const auto& knot : D0.values)
      for (const auto& v : knot)
        if ((v - e00).cwiseAbs().maxCoeff() > kZeroTol * scale) rep.constant_symmetric_rates = false;
    if ((d00 - d00.transpose()).cwiseAbs().maxCoeff() > kZeroTol * scale) rep.constant_symmetric_rates = false;
    if ((d00.diagonal() - e00.diagonal()).cwiseAbs().maxCoeff() > kZeroTol * scale)
      rep.constant_symmetric_rates = false;
  }

  // common symmetric kernel, A symmetric
  rep.symmetric_kernel_and_A = true;
  for (double t : tsamp)
    for (int p = 0; p < n; p += stride)
      for (int q = 0; q < n; q += stride) {
        double k0 = kernels.kernels[0](grid.nodes[p], grid.nodes[q], t);
        if (std::abs(k0 - kernels.kernels[0](grid.nodes[q], grid.nodes[p], t)) >
            1e-12 * std::max(1.0, std::abs(k0)))
          rep.symmetric_kernel_and_A = false;
        for (int i = 1; i < kernels.l; ++i)
          if (std::abs(k0 - kernels.kernels[i](grid.nodes[p], grid.nodes[q], t)) >
              1e-12 * std::max(1.0, std::abs(k0)))
            rep.symmetric_kernel_and_A = false;
      }
  double ascale = std::max(1.0, A.max_abs());
  for (const auto& knot : A.values)
    for (const auto& v : knot)
      if ((v - v.transpose()).cwiseAbs().maxCoeff() > kZeroTol * ascale) rep.symmetric_kernel_and_A = false;

  return rep;
}

}  // namespace nls
