#include "vcflr/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "vcflr/simd/moments.hpp"

namespace vcflr {
namespace {

void check_bandwidth(const LocalFitConfig& cfg) {
  if (!(cfg.bandwidth > 0.0) || !std::isfinite(cfg.bandwidth) || cfg.bandwidth2 < 0.0) {
    throw Error(ErrorKind::invalid_argument, "smoother bandwidths must be strictly positive");
  }
}

[[noreturn]] void insufficient(double s) {
  throw Error(ErrorKind::insufficient_local_data,
              "too few distinct points inside the kernel window at " + std::to_string(s));
}

// Normalised determinant below this marks a near-singular local system.
constexpr double kSingularDet = 1e-12;

}  // namespace

LocalFitConfig LocalFitConfig::widened(double factor) const {
  LocalFitConfig out = *this;
  out.bandwidth *= factor;
  if (out.bandwidth2 > 0.0) out.bandwidth2 *= factor;
  return out;
}

LocalLinear1D::LocalLinear1D(std::span<const Point1> points) {
  std::vector<Point1> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const Point1& a, const Point1& b) { return a.x < b.x; });
  x_.reserve(sorted.size());
  y_.reserve(sorted.size());
  w_.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < sorted.size() && sorted[j].x == sorted[i].x) sum += sorted[j++].y;
    const double count = static_cast<double>(j - i);
    x_.push_back(sorted[i].x);
    y_.push_back(sum / count);
    w_.push_back(count);
    i = j;
  }
}

double LocalLinear1D::at(double s, const LocalFitConfig& cfg) const {
  check_bandwidth(cfg);
  const double b = cfg.bandwidth;
  const auto lo = static_cast<std::size_t>(std::lower_bound(x_.begin(), x_.end(), s - b) - x_.begin());
  const auto hi = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), s + b) - x_.begin());
  if (hi <= lo) insufficient(s);
  const std::size_t n = hi - lo;
  const simd::Samples1D window{{x_.data() + lo, n}, {y_.data() + lo, n}, {w_.data() + lo, n}};
  const auto m = simd::accumulate_moments_1d(window, s, 1.0 / b, cfg.kernel.family);
  if (m.count < 2.0 || !(m.xmax > m.xmin)) insufficient(s);

  // Solve in u = dx / b so both unknowns share a scale.
  double a00 = m.s0;
  const double a01 = m.s1 / b;
  double a11 = m.s2 / (b * b);
  const double r0 = m.t0;
  const double r1 = m.t1 / b;
  double det = a00 * a11 - a01 * a01;
  if (!(a00 > 0.0 && a11 > 0.0) || det < kSingularDet * a00 * a11) {
    const double lambda = cfg.ridge * 0.5 * (a00 + a11);
    a00 += lambda;
    a11 += lambda;
    det = a00 * a11 - a01 * a01;
  }
  return (a11 * r0 - a01 * r1) / det;
}

GridFunction LocalLinear1D::on(const Grid& grid, const LocalFitConfig& cfg) const {
  GridFunction out(grid);
  for (Eigen::Index k = 0; k < grid.abscissae.size(); ++k) out.values[k] = at(grid.abscissae[k], cfg);
  return out;
}

LocalLinear2D::LocalLinear2D(std::span<const Point2> points) {
  std::vector<Point2> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const Point2& a, const Point2& b) {
    return a.x1 < b.x1 || (a.x1 == b.x1 && a.x2 < b.x2);
  });
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < sorted.size() && sorted[j].x1 == sorted[i].x1 && sorted[j].x2 == sorted[i].x2) {
      sum += sorted[j++].y;
    }
    const double count = static_cast<double>(j - i);
    x1_.push_back(sorted[i].x1);
    x2_.push_back(sorted[i].x2);
    y_.push_back(sum / count);
    w_.push_back(count);
    i = j;
  }
}

double LocalLinear2D::at(double s1, double s2, const LocalFitConfig& cfg) const {
  check_bandwidth(cfg);
  const double b1 = cfg.bandwidth;
  const double b2 = cfg.second();
  const auto lo = static_cast<std::size_t>(std::lower_bound(x1_.begin(), x1_.end(), s1 - b1) - x1_.begin());
  const auto hi = static_cast<std::size_t>(std::upper_bound(x1_.begin(), x1_.end(), s1 + b1) - x1_.begin());
  if (hi <= lo) insufficient(s1);
  const std::size_t n = hi - lo;
  const simd::Samples2D window{
      {x1_.data() + lo, n}, {x2_.data() + lo, n}, {y_.data() + lo, n}, {w_.data() + lo, n}};
  const auto m = simd::accumulate_moments_2d(window, s1, s2, 1.0 / b1, 1.0 / b2, cfg.kernel.family);
  if (m.count < 3.0 || (!(m.x1max > m.x1min) && !(m.x2max > m.x2min))) insufficient(s1);

  Eigen::Matrix3d a;
  a << m.s0, m.s1 / b1, m.s2 / b2,
       m.s1 / b1, m.s11 / (b1 * b1), m.s12 / (b1 * b2),
       m.s2 / b2, m.s12 / (b1 * b2), m.s22 / (b2 * b2);
  const Eigen::Vector3d rhs(m.t0, m.t1 / b1, m.t2 / b2);

  const Eigen::Vector3d d = a.diagonal();
  bool singular = !(d.minCoeff() > 0.0);
  if (!singular) {
    const Eigen::Vector3d inv_sqrt = d.cwiseSqrt().cwiseInverse();
    const Eigen::Matrix3d normalized = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
    singular = normalized.determinant() < kSingularDet;
  }
  if (singular) a.diagonal().array() += cfg.ridge * d.mean();
  return a.ldlt().solve(rhs)[0];
}

GridSurface LocalLinear2D::on(const Grid& rows, const Grid& cols, const LocalFitConfig& cfg) const {
  GridSurface out(rows, cols);
  for (Eigen::Index i = 0; i < rows.abscissae.size(); ++i) {
    for (Eigen::Index j = 0; j < cols.abscissae.size(); ++j) {
      out.values(i, j) = at(rows.abscissae[i], cols.abscissae[j], cfg);
    }
  }
  return out;
}

GridFunction local_linear_1d(std::span<const Point1> points, const LocalFitConfig& cfg, const Grid& eval) {
  return LocalLinear1D(points).on(eval, cfg);
}

GridSurface local_linear_2d(std::span<const Point2> points, const LocalFitConfig& cfg, const Grid& rows,
                            const Grid& cols) {
  return LocalLinear2D(points).on(rows, cols, cfg);
}

std::vector<double> lp_weights(int q, int r, std::span<const double> centers, double z, double b,
                               const Kernel1D& kernel) {
  if (q < 0 || r < 1 || q > r) throw Error(ErrorKind::invalid_argument, "lp_weights needs 0 <= q <= r, r >= 1");
  if (!(b > 0.0)) throw Error(ErrorKind::invalid_argument, "lp_weights bandwidth must be positive");
  const std::size_t p_count = centers.size();
  const int dim = r + 1;

  std::vector<double> kw(p_count);
  std::size_t active = 0;
  for (std::size_t p = 0; p < p_count; ++p) {
    kw[p] = kernel((centers[p] - z) / b) / b;
    if (kw[p] > 0.0) ++active;
  }

  std::vector<double> weights(p_count, 0.0);
  if (active < static_cast<std::size_t>(dim)) {
    if (q == 0) {
      for (std::size_t p = 0; p < p_count; ++p) {
        if (std::abs(centers[p] - z) <= 1e-12 * std::max(1.0, std::abs(z))) {
          weights[p] = 1.0;
          return weights;
        }
      }
    }
    throw Error(ErrorKind::insufficient_centers,
                std::to_string(active) + " centers carry weight at z = " + std::to_string(z) + ", need " +
                    std::to_string(dim));
  }

  // Design in u = (z_p - z)/b; the derivative weight picks up 1/b^q.
  Eigen::MatrixXd cwc = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd design(static_cast<Eigen::Index>(p_count), dim);
  for (std::size_t p = 0; p < p_count; ++p) {
    const double u = (centers[p] - z) / b;
    double power = 1.0;
    for (int j = 0; j < dim; ++j) {
      design(static_cast<Eigen::Index>(p), j) = power;
      power *= u;
    }
    const auto row = design.row(static_cast<Eigen::Index>(p));
    cwc.noalias() += kw[p] * row.transpose() * row;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(cwc);
  if (qr.rank() < dim) {
    throw Error(ErrorKind::insufficient_centers, "local polynomial design is rank deficient");
  }
  const Eigen::VectorXd e = Eigen::VectorXd::Unit(dim, q);
  const Eigen::VectorXd coef = qr.solve(e);
  double factorial = 1.0;
  for (int j = 2; j <= q; ++j) factorial *= j;
  const double scale = factorial / std::pow(b, q);
  for (std::size_t p = 0; p < p_count; ++p) {
    weights[p] = scale * design.row(static_cast<Eigen::Index>(p)).dot(coef) * kw[p];
  }
  return weights;
}

std::pair<std::vector<double>, double> lp_weights_widened(int q, int r, std::span<const double> centers,
                                                          double z, double b, const Kernel1D& kernel) {
  for (int attempt = 0;; ++attempt) {
    try {
      return {lp_weights(q, r, centers, z, b, kernel), b};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::insufficient_centers || attempt == kMaxWidenings) throw;
      b *= kWidenFactor;
    }
  }
}

SmoothingMatrix smoothing_matrix(std::span<const double> centers, double b, const Kernel1D& kernel) {
  const auto n = static_cast<Eigen::Index>(centers.size());
  SmoothingMatrix out;
  out.S.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto w = lp_weights(0, 1, centers, centers[static_cast<std::size_t>(i)], b, kernel);
    for (Eigen::Index j = 0; j < n; ++j) out.S(i, j) = w[static_cast<std::size_t>(j)];
  }
  out.trace_sts = out.S.squaredNorm();
  return out;
}

}  // namespace vcflr
