#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace nls {

// Point in the spatial domain; y is ignored when dim == 1.
struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double dist(const Point& a, const Point& b, int dim) {
  double dx = a.x - b.x;
  if (dim == 1) return std::abs(dx);
  double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

// Axis-aligned box domain, 1D or 2D.
struct Box {
  int dim = 1;
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};

  double volume() const {
    double v = hi[0] - lo[0];
    if (dim == 2) v *= hi[1] - lo[1];
    return v;
  }
  bool contains(const Point& p, double tol = 1e-12) const {
    if (p.x < lo[0] - tol || p.x > hi[0] + tol) return false;
    if (dim == 2 && (p.y < lo[1] - tol || p.y > hi[1] + tol)) return false;
    return true;
  }
};

enum class QuadratureRule { Midpoint, Trapezoid };

// Quadrature nodes and weights on a box domain. Immutable after construction.
struct SpatialGrid {
  int dim = 1;
  Box bounds;
  QuadratureRule rule = QuadratureRule::Midpoint;
  std::vector<Point> nodes;
  Eigen::VectorXd weights;
  std::array<int, 2> n_axis{0, 0};
  std::array<double, 2> h{0.0, 0.0};  // cell size per axis

  int n() const { return static_cast<int>(nodes.size()); }
};

// Uniform knots covering exactly one period [0,1]; knots[0]=0, knots[steps]=1.
struct TimeGrid {
  int steps = 0;
  double dt = 0.0;
  std::vector<double> knots;
};

SpatialGrid build_spatial_grid(const Box& bounds, std::array<int, 2> n_per_axis,
                               QuadratureRule rule = QuadratureRule::Midpoint);
SpatialGrid build_spatial_grid_1d(double a, double b, int n,
                                  QuadratureRule rule = QuadratureRule::Midpoint);

TimeGrid build_time_grid(int steps);

// Sum_j w_j f(x_j).
double quadrature(const Eigen::VectorXd& samples, const SpatialGrid& grid);

}  // namespace nls
