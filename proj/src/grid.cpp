#include "vcflr/grid.hpp"

#include <algorithm>
#include <cmath>

#include "vcflr/error.hpp"

namespace vcflr {

Grid Grid::point(double at) {
  Grid g;
  g.lower = at;
  g.upper = at;
  g.abscissae = Eigen::VectorXd::Constant(1, at);
  g.weights = Eigen::VectorXd::Ones(1);
  return g;
}

bool operator==(const Grid& a, const Grid& b) {
  return a.size() == b.size() && a.lower == b.lower && a.upper == b.upper;
}

Grid make_grid(double lower, double upper, std::size_t n) {
  if (!(lower < upper) || !std::isfinite(lower) || !std::isfinite(upper)) {
    throw Error(ErrorKind::invalid_interval, "grid requires lower < upper");
  }
  if (n < 2) throw Error(ErrorKind::invalid_argument, "grid requires at least 2 points");
  Grid g;
  g.lower = lower;
  g.upper = upper;
  g.abscissae.resize(static_cast<Eigen::Index>(n));
  g.weights.resize(static_cast<Eigen::Index>(n));
  const double step = (upper - lower) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    g.abscissae[static_cast<Eigen::Index>(i)] = lower + step * static_cast<double>(i);
  }
  g.abscissae[static_cast<Eigen::Index>(n - 1)] = upper;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double left = i > 0 ? g.abscissae[k] - g.abscissae[k - 1] : 0.0;
    const double right = i + 1 < n ? g.abscissae[k + 1] - g.abscissae[k] : 0.0;
    g.weights[k] = 0.5 * (left + right);
  }
  return g;
}

GridFunction::GridFunction(Grid g, Eigen::VectorXd v) : grid(std::move(g)), values(std::move(v)) {
  if (static_cast<std::size_t>(values.size()) != grid.size()) {
    throw Error(ErrorKind::grid_mismatch, "grid function length does not match its grid");
  }
}

GridFunction::GridFunction(Grid g) : grid(std::move(g)) {
  values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
}

CellPosition locate(const Grid& grid, double x) {
  const std::size_t n = grid.size();
  if (n < 2 || x <= grid.lower) return {0, 0.0};
  if (x >= grid.upper) return {n - 2, 1.0};
  const double pos = (x - grid.lower) / grid.spacing();
  auto idx = static_cast<std::size_t>(std::floor(pos));
  idx = std::min(idx, n - 2);
  const double frac = std::clamp(pos - static_cast<double>(idx), 0.0, 1.0);
  return {idx, frac};
}

double GridFunction::at(double x) const {
  if (grid.size() == 1) return values[0];
  const auto [i, f] = locate(grid, x);
  const auto k = static_cast<Eigen::Index>(i);
  return (1.0 - f) * values[k] + f * values[k + 1];
}

GridSurface::GridSurface(Grid r, Grid c, Eigen::MatrixXd v)
    : rows(std::move(r)), cols(std::move(c)), values(std::move(v)) {
  if (static_cast<std::size_t>(values.rows()) != rows.size() ||
      static_cast<std::size_t>(values.cols()) != cols.size()) {
    throw Error(ErrorKind::grid_mismatch, "surface dimensions do not match its grids");
  }
}

GridSurface::GridSurface(Grid r, Grid c) : rows(std::move(r)), cols(std::move(c)) {
  values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                 static_cast<Eigen::Index>(cols.size()));
}

double GridSurface::at(double x, double y) const {
  Eigen::Index i0 = 0, i1 = 0, j0 = 0, j1 = 0;
  double fx = 0.0, fy = 0.0;
  if (rows.size() > 1) {
    const auto p = locate(rows, x);
    i0 = static_cast<Eigen::Index>(p.index);
    i1 = i0 + 1;
    fx = p.fraction;
  }
  if (cols.size() > 1) {
    const auto p = locate(cols, y);
    j0 = static_cast<Eigen::Index>(p.index);
    j1 = j0 + 1;
    fy = p.fraction;
  }
  return (1.0 - fx) * ((1.0 - fy) * values(i0, j0) + fy * values(i0, j1)) +
         fx * ((1.0 - fy) * values(i1, j0) + fy * values(i1, j1));
}

double integrate(const GridFunction& f) { return f.grid.weights.dot(f.values); }

double integrate_range(const GridFunction& f, double a, double b) {
  const Grid& g = f.grid;
  if (g.size() < 2) throw Error(ErrorKind::invalid_argument, "integrate_range needs a proper grid");
  a = std::max(a, g.lower);
  b = std::min(b, g.upper);
  if (!(a < b)) return 0.0;
  double total = 0.0;
  double prev_x = a;
  double prev_y = f.at(a);
  for (Eigen::Index k = 0; k < g.abscissae.size(); ++k) {
    const double x = g.abscissae[k];
    if (x <= a) continue;
    if (x >= b) break;
    total += 0.5 * (x - prev_x) * (prev_y + f.values[k]);
    prev_x = x;
    prev_y = f.values[k];
  }
  total += 0.5 * (b - prev_x) * (prev_y + f.at(b));
  return total;
}

double inner_product(const GridFunction& f, const GridFunction& g) {
  if (!(f.grid == g.grid)) throw Error(ErrorKind::grid_mismatch, "inner product over different grids");
  return (f.grid.weights.array() * f.values.array() * g.values.array()).sum();
}

double double_integral(const GridSurface& kernel, const GridFunction& left, const GridFunction& right) {
  if (!(kernel.rows == left.grid) || !(kernel.cols == right.grid)) {
    throw Error(ErrorKind::grid_mismatch, "double integral operands on different grids");
  }
  const Eigen::VectorXd lw = left.values.cwiseProduct(kernel.rows.weights);
  const Eigen::VectorXd rw = right.values.cwiseProduct(kernel.cols.weights);
  return lw.dot(kernel.values * rw);
}

}  // namespace vcflr
