#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vcflr/data.hpp"
#include "vcflr/grid.hpp"
#include "vcflr/smoothing.hpp"

namespace vcflr {

enum class Stream { x, y };

/// Eigenpairs of a smoothed covariance operator: eigenvalues strictly
/// positive and non-increasing, eigenfunctions orthonormal under the
/// trapezoid inner product, each with nonnegative integral.
struct EigenSystem {
  Eigen::VectorXd values;
  std::vector<GridFunction> functions;

  std::size_t size() const { return functions.size(); }
};

/// Raw covariance products grouped by subject. Off-diagonal pairs exclude
/// j == l; the diagonal products are kept apart for the noise variance.
struct RawCovariances {
  std::vector<std::vector<Point2>> off_diagonal;
  std::vector<std::vector<Point1>> diagonal;
};

using Grouped1D = std::vector<std::vector<Point1>>;
using Grouped2D = std::vector<std::vector<Point2>>;

template <class P>
std::vector<P> flatten(const std::vector<std::vector<P>>& groups) {
  std::vector<P> out;
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  out.reserve(n);
  for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

enum class SmootherKind { mean_x, mean_y, cov_x, cov_y, var_x, var_y, cross };

const char* to_string(SmootherKind kind);

/// Effective bandwidths used for one bin (after any widening).
struct BinBandwidths {
  double mean_x = 0, mean_y = 0;
  double cov_x = 0, cov_y = 0;
  double var_x = 0, var_y = 0;
  double cross_s = 0, cross_t = 0;
};

/// Supplies the starting smoother configuration for each raw-data set of a
/// bin. The default is a Silverman-type rule; model selection plugs in
/// cross-validation, and fixed overrides plug in constants.
struct BandwidthRule {
  std::function<LocalFitConfig(SmootherKind, const Grouped1D&)> one_d;
  std::function<LocalFitConfig(SmootherKind, const Grouped2D&)> two_d;
};

/// 1.06·sd(x)·n^(-1/5) in one dimension and 1.06·sd(x_d)·n^(-1/6) per
/// coordinate in two, n counting raw points.
LocalFitConfig default_bandwidth_1d(const Grouped1D& data, const Kernel1D& kernel = {});
LocalFitConfig default_bandwidth_2d(const Grouped2D& data, const Kernel1D& kernel = {});
BandwidthRule default_bandwidth_rule(const Kernel1D& kernel = {});
BandwidthRule fixed_bandwidth_rule(const BinBandwidths& bw, const Kernel1D& kernel = {});

struct BinEstimate {
  double center = 0.0;
  std::size_t subjects = 0;
  GridFunction mean_x, mean_y;
  GridSurface cov_x, cov_y;
  GridSurface cross_cov;  // S×T, or S×1 for a scalar response
  EigenSystem eig_x, eig_y;
  Eigen::MatrixXd sigma_mk;  // all available components
  double sigma2_x = 0.0, sigma2_y = 0.0;
  GridSurface raw_beta;  // at the model truncation
  BinBandwidths bandwidths;
};

struct BinFitOptions {
  Grid s_grid;
  Grid t_grid;  // Grid::point() for a scalar response
  bool scalar_response = false;
  Kernel1D kernel{};
  std::size_t max_components = 6;
};

Grouped1D stream_points(std::span<const Subject> subjects, Stream stream);

GridFunction estimate_mean(std::span<const Subject> subjects, Stream stream, const LocalFitConfig& cfg,
                           const Grid& grid);

RawCovariances raw_covariances(std::span<const Subject> subjects, Stream stream, const GridFunction& mean);

/// 2-D local linear smooth of off-diagonal raw covariances, symmetrised.
GridSurface smooth_covariance(std::span<const Point2> pairs, const LocalFitConfig& cfg, const Grid& grid);

/// Smooths the diagonal raw covariances to Ṽ and integrates Ṽ − G̃(s,s) over
/// the middle half of the domain, scaled by 2/|domain|; clamped at 0.
double estimate_sigma2(std::span<const Point1> diagonal, const GridSurface& surface, const LocalFitConfig& cfg,
                       const Grid& grid);

/// Eigenanalysis of the integral operator with kernel `surface` under
/// trapezoid quadrature. Throws NotSymmetric.
EigenSystem eigendecompose(const GridSurface& surface, const Grid& grid, std::size_t max_components);

/// Products (U_il − μ̃_X(S_il))(V_ij − μ̃_Y(T_ij)) over all l, j.
Grouped2D raw_cross_covariances(std::span<const Subject> subjects, const GridFunction& mean_x,
                                const GridFunction& mean_y);

/// Smoothed cross-covariance on s_grid × t_grid. For a one-point t_grid
/// (scalar response) the products are smoothed in s only.
GridSurface smooth_cross_covariance(std::span<const Point2> pairs, const LocalFitConfig& cfg, const Grid& s_grid,
                                    const Grid& t_grid);

/// σ̃_mk = ∫∫ ψ̃_m(s) C̃(s,t) φ̃_k(t) ds dt for m < M, k < K.
Eigen::MatrixXd sigma_mk(const EigenSystem& eig_x, const EigenSystem& eig_y, const GridSurface& cross,
                         std::size_t M, std::size_t K);

/// Factorised Σ̃ = G̃(T_j, T_k) + σ̃² δ_jk at one subject's observation times.
/// A diagonal jitter of 1e-8·tr(Σ̃)/N is added when the condition number
/// exceeds 1e12.
class ScoreSolver {
 public:
  ScoreSolver(std::span<const Observation> obs, const GridSurface& cov, double sigma2);

  /// Σ̃⁻¹ r
  Eigen::VectorXd solve(const Eigen::VectorXd& r) const;

  std::size_t size() const { return static_cast<std::size_t>(times_.size()); }
  const Eigen::VectorXd& times() const { return times_; }

 private:
  Eigen::VectorXd times_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

/// Conditional-expectation scores λ̃_k φ̃_k(T)ᵀ Σ̃⁻¹ (V − μ̃(T)), k < truncation.
Eigen::VectorXd estimate_scores(std::span<const Observation> obs, const GridFunction& mean, const GridSurface& cov,
                                const EigenSystem& eig, double sigma2, std::size_t truncation);

/// Evaluates a grid function at each observation time.
Eigen::VectorXd evaluate_at(const GridFunction& f, std::span<const Observation> obs);

/// Full raw estimate for one bin.
BinEstimate fit_bin(std::span<const Subject> subjects, double center, const BinFitOptions& options,
                    const BandwidthRule& rule);

}  // namespace vcflr
