#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vcflr/error.hpp"
#include "vcflr/grid.hpp"
#include "vcflr/kernels.hpp"

namespace vcflr {

struct Point1 {
  double x;
  double y;
};

struct Point2 {
  double x1;
  double x2;
  double y;
};

/// Bandwidth and kernel for one local linear smoother. `bandwidth2` is the
/// second-coordinate bandwidth of a 2-D smoother; 0 means "same as bandwidth".
struct LocalFitConfig {
  double bandwidth = 1.0;
  double bandwidth2 = 0.0;
  Kernel1D kernel{};
  double ridge = 1e-10;

  double second() const { return bandwidth2 > 0.0 ? bandwidth2 : bandwidth; }
  LocalFitConfig widened(double factor) const;
};

inline constexpr double kWidenFactor = 1.5;
inline constexpr int kMaxWidenings = 5;

/// Local linear smoother over scattered (x, y) data. Points are sorted and
/// exact duplicates merged (multiplicity-weighted), which leaves every local
/// least-squares solution unchanged.
class LocalLinear1D {
 public:
  explicit LocalLinear1D(std::span<const Point1> points);

  /// Intercept of the kernel-weighted linear fit centred at s.
  /// Throws InsufficientLocalData if fewer than two distinct x carry weight.
  double at(double s, const LocalFitConfig& cfg) const;

  GridFunction on(const Grid& grid, const LocalFitConfig& cfg) const;

  std::size_t size() const { return x_.size(); }

 private:
  std::vector<double> x_, y_, w_;
};

class LocalLinear2D {
 public:
  explicit LocalLinear2D(std::span<const Point2> points);

  double at(double s1, double s2, const LocalFitConfig& cfg) const;

  GridSurface on(const Grid& rows, const Grid& cols, const LocalFitConfig& cfg) const;

  std::size_t size() const { return x1_.size(); }

 private:
  std::vector<double> x1_, x2_, y_, w_;  // sorted by x1
};

GridFunction local_linear_1d(std::span<const Point1> points, const LocalFitConfig& cfg, const Grid& eval);

GridSurface local_linear_2d(std::span<const Point2> points, const LocalFitConfig& cfg,
                            const Grid& rows, const Grid& cols);

/// Runs `fit(cfg)`, widening the bandwidth(s) by 1.5 after each
/// InsufficientLocalData, at most five times. Returns the result together
/// with the configuration that succeeded.
template <class Fit>
auto with_widening(LocalFitConfig cfg, Fit&& fit) -> std::pair<decltype(fit(cfg)), LocalFitConfig> {
  for (int attempt = 0;; ++attempt) {
    try {
      return {fit(cfg), cfg};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::insufficient_local_data || attempt == kMaxWidenings) throw;
      cfg = cfg.widened(kWidenFactor);
    }
  }
}

/// Local polynomial weights ω_{q,r+1}(z_p, z, b): applied to values of a
/// function at `centers`, they estimate its q-th derivative at z with a
/// degree-r local fit. Throws InsufficientCenters when fewer than r+1
/// centers carry kernel weight (except the q = 0 limit where z sits on a
/// center, which yields the unit vector).
std::vector<double> lp_weights(int q, int r, std::span<const double> centers, double z, double b,
                               const Kernel1D& kernel = {});

/// lp_weights with the 1.5x bandwidth widening protocol. Returns the
/// weights and the bandwidth that worked.
std::pair<std::vector<double>, double> lp_weights_widened(int q, int r, std::span<const double> centers,
                                                          double z, double b, const Kernel1D& kernel = {});

struct SmoothingMatrix {
  Eigen::MatrixXd S;     // row p is ω_{0,2}(·, z_p, b)
  double trace_sts = 0;  // tr(SᵀS)
};

SmoothingMatrix smoothing_matrix(std::span<const double> centers, double b, const Kernel1D& kernel = {});

}  // namespace vcflr
