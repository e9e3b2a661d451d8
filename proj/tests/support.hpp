#pragma once

// Shared helpers for the test binaries: seeded generators and small
// independent oracles.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "vcflr/grid.hpp"
#include "vcflr/kernels.hpp"

namespace vcflr::test {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }
  std::mt19937_64& engine() { return rng_; }

  KernelFamily kernel() {
    switch (integer(0, 2)) {
      case 0: return KernelFamily::epanechnikov;
      case 1: return KernelFamily::quartic;
      default: return KernelFamily::uniform;
    }
  }

 private:
  std::mt19937_64 rng_;
};

// Written out independently of the library's kernel code.
inline double oracle_kernel(KernelFamily f, double u) {
  const double a = std::abs(u);
  switch (f) {
    case KernelFamily::epanechnikov: return a < 1 ? 0.75 * (1 - u * u) : 0.0;
    case KernelFamily::quartic: return a < 1 ? 15.0 / 16.0 * (1 - u * u) * (1 - u * u) : 0.0;
    case KernelFamily::uniform: return a <= 1 ? 0.5 : 0.0;
  }
  return 0.0;
}

inline double psi(int m, double s) {
  const double c = std::sqrt(0.2), w = std::numbers::pi * s / 5.0;
  if (m == 0) return -c * std::cos(w);
  if (m == 1) return c * std::sin(w);
  return -c * std::cos(2 * w);
}

inline GridFunction sampled(const Grid& g, auto&& f) {
  GridFunction out(g);
  for (Eigen::Index j = 0; j < out.values.size(); ++j) out.values[j] = f(g.abscissae[j]);
  return out;
}

inline GridSurface sampled2(const Grid& r, const Grid& c, auto&& f) {
  GridSurface out(r, c);
  for (Eigen::Index i = 0; i < out.values.rows(); ++i)
    for (Eigen::Index j = 0; j < out.values.cols(); ++j) out.values(i, j) = f(r.abscissae[i], c.abscissae[j]);
  return out;
}

// Trapezoid L2 norm of the difference of two grid functions on one grid.
inline double l2_diff(const GridFunction& a, const GridFunction& b) {
  const Eigen::VectorXd d = (a.values - b.values).array().square();
  return std::sqrt(d.dot(a.grid.weights));
}

}  // namespace vcflr::test
