#pragma once

#include <cstddef>
#include <Eigen/Dense>

namespace vcflr {

/// Equally spaced abscissae over [lower, upper] with trapezoid weights.
///
/// A single-point grid (lower == upper, weight 1) stands in for the
/// response domain of scalar-response models, so that a scalar response
/// is handled as a functional response observed at one time.
struct Grid {
  double lower = 0.0;
  double upper = 0.0;
  Eigen::VectorXd abscissae;
  Eigen::VectorXd weights;

  std::size_t size() const { return static_cast<std::size_t>(abscissae.size()); }
  double length() const { return upper - lower; }
  double spacing() const { return size() > 1 ? (upper - lower) / static_cast<double>(size() - 1) : 0.0; }
  bool is_point() const { return size() == 1; }

  /// Degenerate one-point grid with unit weight.
  static Grid point(double at = 0.0);

  friend bool operator==(const Grid& a, const Grid& b);
};

Grid make_grid(double lower, double upper, std::size_t n);

struct GridFunction {
  Grid grid;
  Eigen::VectorXd values;

  GridFunction() = default;
  GridFunction(Grid g, Eigen::VectorXd v);
  explicit GridFunction(Grid g);  // zero-initialised

  /// Piecewise-linear interpolation, clamped to the end values outside the grid.
  double at(double x) const;
};

struct GridSurface {
  Grid rows;
  Grid cols;
  Eigen::MatrixXd values;

  GridSurface() = default;
  GridSurface(Grid r, Grid c, Eigen::MatrixXd v);
  GridSurface(Grid r, Grid c);  // zero-initialised

  /// Bilinear interpolation, clamped at the borders.
  double at(double x, double y) const;
};

double integrate(const GridFunction& f);

/// Exact integral of the piecewise-linear interpolant of f over [a, b] ⊆ grid range.
double integrate_range(const GridFunction& f, double a, double b);

double inner_product(const GridFunction& f, const GridFunction& g);

/// leftᵀ · diag(row weights) · kernel · diag(col weights) · right
double double_integral(const GridSurface& kernel, const GridFunction& left, const GridFunction& right);

// Location of x inside the grid: lower cell index and fractional offset in [0, 1].
struct CellPosition {
  std::size_t index;
  double fraction;
};
CellPosition locate(const Grid& grid, double x);

}  // namespace vcflr
