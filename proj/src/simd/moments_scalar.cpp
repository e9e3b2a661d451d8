#include <algorithm>

#include "vcflr/simd/moments.hpp"

namespace vcflr::simd::scalar {

Moments1D accumulate_moments_1d(const Samples1D& s, double center, double inv_bandwidth, KernelFamily family) {
  const Kernel1D kernel{family};
  Moments1D m;
  bool first = true;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    const double dx = s.x[i] - center;
    const double kw = kernel(dx * inv_bandwidth) * s.w[i];
    if (!(kw > 0.0)) continue;
    const double y = s.y[i];
    m.s0 += kw;
    m.s1 += kw * dx;
    m.s2 += kw * dx * dx;
    m.t0 += kw * y;
    m.t1 += kw * dx * y;
    m.count += 1.0;
    if (first) {
      m.xmin = m.xmax = s.x[i];
      first = false;
    } else {
      m.xmin = std::min(m.xmin, s.x[i]);
      m.xmax = std::max(m.xmax, s.x[i]);
    }
  }
  return m;
}

Moments2D accumulate_moments_2d(const Samples2D& s, double c1, double c2, double inv_b1, double inv_b2,
                                KernelFamily family) {
  const Kernel1D kernel{family};
  Moments2D m;
  bool first = true;
  for (std::size_t i = 0; i < s.x1.size(); ++i) {
    const double d1 = s.x1[i] - c1;
    const double d2 = s.x2[i] - c2;
    const double kw = kernel(d1 * inv_b1) * kernel(d2 * inv_b2) * s.w[i];
    if (!(kw > 0.0)) continue;
    const double y = s.y[i];
    m.s0 += kw;
    m.s1 += kw * d1;
    m.s2 += kw * d2;
    m.s11 += kw * d1 * d1;
    m.s12 += kw * d1 * d2;
    m.s22 += kw * d2 * d2;
    m.t0 += kw * y;
    m.t1 += kw * d1 * y;
    m.t2 += kw * d2 * y;
    m.count += 1.0;
    if (first) {
      m.x1min = m.x1max = s.x1[i];
      m.x2min = m.x2max = s.x2[i];
      first = false;
    } else {
      m.x1min = std::min(m.x1min, s.x1[i]);
      m.x1max = std::max(m.x1max, s.x1[i]);
      m.x2min = std::min(m.x2min, s.x2[i]);
      m.x2max = std::max(m.x2max, s.x2[i]);
    }
  }
  return m;
}

}  // namespace vcflr::simd::scalar
