#pragma once

// Kernel-weighted moment sums feeding the local linear normal equations.
// These loops dominate smoothing cost, so they come in a scalar reference
// version and vectorised variants chosen at runtime (see dispatch.hpp).

#include <cstddef>
#include <span>

#include "vcflr/kernels.hpp"

namespace vcflr::simd {

// Sums over points with weight k((x - c)/b)·w, with dx = x - c:
//   s0 = Σ kw, s1 = Σ kw·dx, s2 = Σ kw·dx², t0 = Σ kw·y, t1 = Σ kw·dx·y
// plus the count and x-range of points carrying positive weight.
struct Moments1D {
  double s0 = 0, s1 = 0, s2 = 0;
  double t0 = 0, t1 = 0;
  double count = 0;
  double xmin = 0, xmax = 0;
};

// Same for two predictors: the 3x3 matrix [1 dx1 dx2]ᵀ[1 dx1 dx2] and
// right-hand side [1 dx1 dx2]ᵀ y, each kernel weighted.
struct Moments2D {
  double s0 = 0, s1 = 0, s2 = 0;
  double s11 = 0, s12 = 0, s22 = 0;
  double t0 = 0, t1 = 0, t2 = 0;
  double count = 0;
  double x1min = 0, x1max = 0, x2min = 0, x2max = 0;
};

struct Samples1D {
  std::span<const double> x, y, w;
};

struct Samples2D {
  std::span<const double> x1, x2, y, w;
};

Moments1D accumulate_moments_1d(const Samples1D& s, double center, double inv_bandwidth, KernelFamily family);

Moments2D accumulate_moments_2d(const Samples2D& s, double c1, double c2, double inv_b1, double inv_b2,
                                KernelFamily family);

namespace scalar {
Moments1D accumulate_moments_1d(const Samples1D& s, double center, double inv_bandwidth, KernelFamily family);
Moments2D accumulate_moments_2d(const Samples2D& s, double c1, double c2, double inv_b1, double inv_b2,
                                KernelFamily family);
}  // namespace scalar

namespace avx2 {
// Only callable when the CPU reports AVX2 and FMA.
Moments1D accumulate_moments_1d(const Samples1D& s, double center, double inv_bandwidth, KernelFamily family);
Moments2D accumulate_moments_2d(const Samples2D& s, double c1, double c2, double inv_b1, double inv_b2,
                                KernelFamily family);
}  // namespace avx2

}  // namespace vcflr::simd
