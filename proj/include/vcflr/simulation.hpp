#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vcflr/data.hpp"
#include "vcflr/grid.hpp"

namespace vcflr {

enum class Sampling { regular, sparse };

Sampling parse_sampling(std::string_view name);
std::string to_string(Sampling s);

/// Three-component design on S = T = [0, 10] with Z ~ U[0, 1].
struct SimDesign {
  Sampling sampling = Sampling::regular;
  std::array<double, 3> score_sd{2.0, 1.4142135623730951, 1.0};
  double noise_var_x = 1.0;
  double noise_var_y = 1.0;
  std::size_t regular_points = 31;  // at (j-1)/3
  std::size_t min_count = 2;        // sparse counts uniform on {min..max}
  std::size_t max_count = 10;
  bool varying = true;  // false: the z-factor (1 + z) is replaced by 1.5

  static constexpr double lower = 0.0;
  static constexpr double upper = 10.0;
};

double sim_mean_x(double s);
double sim_mean_y(const SimDesign& d, double z, double t);
double sim_psi(int m, double s);  // m = 0, 1, 2
double sim_slope_factor(const SimDesign& d, double z);
double sim_beta(const SimDesign& d, double z, double s, double t);

/// True scores and conditional response curves E(Y(t) | X, Z) on `grid`.
struct SimTruth {
  Grid grid;
  std::vector<std::string> ids;
  std::vector<double> z;
  std::vector<std::array<double, 3>> zeta;
  std::vector<GridFunction> response;
};

struct SimData {
  LongitudinalDataset data;
  SimTruth truth;
};

/// Per-subject generator seeded from (seed, stream, subject) via splitmix64.
std::mt19937_64 subject_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t subject);

/// E(Y(t) | X, Z) with ∫β(z, s, t)(X(s) − μ_X(s)) ds by 501-point
/// trapezoid quadrature.
double conditional_response(const SimDesign& d, double z, const std::array<double, 3>& zeta, double t);

/// Closed form μ_Y,z(t) + c(z) Σ ζ_m ψ_m(t).
double conditional_response_exact(const SimDesign& d, double z, const std::array<double, 3>& zeta, double t);

/// Training sample. Draw order per subject: z, ζ₁..ζ₃, X count, X times,
/// X noise, Y count, Y times, Y noise (counts and times only when sparse).
SimData generate(const SimDesign& design, std::size_t n, std::uint64_t seed, const Grid& truth_grid);

/// Test sample: each X* observed without noise at `x_points` equally
/// spaced times; no response rows. Uses a different stream than generate.
SimData generate_test(const SimDesign& design, std::size_t n, std::uint64_t seed, const Grid& truth_grid,
                      std::size_t x_points = 101);

/// Mean over subjects of ∫(truth − prediction)² dt / |T|. Throws GridMismatch.
double mispe(const SimTruth& truth, std::span<const GridFunction> predictions);

}  // namespace vcflr
