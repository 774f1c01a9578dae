#include "nls/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace nls {

namespace {

// 1D composite nodes/weights on [a,b] with n cells.
void axis_rule(double a, double b, int n, QuadratureRule rule,
               std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 2) throw std::invalid_argument("build_spatial_grid: n_per_axis must be >= 2");
  double h = (b - a) / n;
  nodes.clear();
  weights.clear();
  if (rule == QuadratureRule::Midpoint) {
    for (int i = 0; i < n; ++i) {
      nodes.push_back(a + (i + 0.5) * h);
      weights.push_back(h);
    }
  } else {
    for (int i = 0; i <= n; ++i) {
      nodes.push_back(a + i * h);
      weights.push_back((i == 0 || i == n) ? 0.5 * h : h);
    }
  }
}

}  // namespace

SpatialGrid build_spatial_grid(const Box& bounds, std::array<int, 2> n_per_axis,
                               QuadratureRule rule) {
  if (bounds.dim != 1 && bounds.dim != 2)
    throw std::invalid_argument("build_spatial_grid: dim must be 1 or 2");
  for (int d = 0; d < bounds.dim; ++d)
    if (!(bounds.hi[d] > bounds.lo[d]))
      throw std::invalid_argument("build_spatial_grid: degenerate box (zero volume)");

  SpatialGrid g;
  g.dim = bounds.dim;
  g.bounds = bounds;
  g.rule = rule;

  std::vector<double> nx, wx, ny, wy;
  axis_rule(bounds.lo[0], bounds.hi[0], n_per_axis[0], rule, nx, wx);
  g.n_axis[0] = static_cast<int>(nx.size());
  g.h[0] = (bounds.hi[0] - bounds.lo[0]) / n_per_axis[0];

  if (bounds.dim == 1) {
    g.nodes.reserve(nx.size());
    g.weights.resize(static_cast<Eigen::Index>(nx.size()));
    for (std::size_t i = 0; i < nx.size(); ++i) {
      g.nodes.push_back({nx[i], 0.0});
      g.weights[static_cast<Eigen::Index>(i)] = wx[i];
    }
    return g;
  }

  axis_rule(bounds.lo[1], bounds.hi[1], n_per_axis[1], rule, ny, wy);
  g.n_axis[1] = static_cast<int>(ny.size());
  g.h[1] = (bounds.hi[1] - bounds.lo[1]) / n_per_axis[1];
  g.nodes.reserve(nx.size() * ny.size());
  g.weights.resize(static_cast<Eigen::Index>(nx.size() * ny.size()));
  Eigen::Index idx = 0;
  for (std::size_t j = 0; j < ny.size(); ++j)
    for (std::size_t i = 0; i < nx.size(); ++i) {
      g.nodes.push_back({nx[i], ny[j]});
      g.weights[idx++] = wx[i] * wy[j];
    }
  return g;
}

SpatialGrid build_spatial_grid_1d(double a, double b, int n, QuadratureRule rule) {
  Box box;
  box.dim = 1;
  box.lo = {a, 0.0};
  box.hi = {b, 1.0};
  return build_spatial_grid(box, {n, 0}, rule);
}

TimeGrid build_time_grid(int steps) {
  if (steps < 1) throw std::invalid_argument("build_time_grid: steps must be >= 1");
  TimeGrid tg;
  tg.steps = steps;
  tg.dt = 1.0 / steps;
  tg.knots.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) tg.knots[k] = static_cast<double>(k) / steps;
  tg.knots[steps] = 1.0;
  return tg;
}

double quadrature(const Eigen::VectorXd& samples, const SpatialGrid& grid) {
  if (samples.size() != grid.weights.size())
    throw std::invalid_argument("quadrature: samples length does not match grid node count");
  return grid.weights.dot(samples);
}

}  // namespace nls
