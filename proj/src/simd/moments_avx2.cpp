// Built with -mavx2 -mfma; reached only through runtime dispatch.

#include <immintrin.h>

#include <algorithm>
#include <limits>

#include "vcflr/simd/moments.hpp"

namespace vcflr::simd::avx2 {
namespace {

// Kernel value for four scaled offsets; zero outside the support.
inline __m256d kernel4(__m256d u, KernelFamily family) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d u2 = _mm256_mul_pd(u, u);
  switch (family) {
    case KernelFamily::epanechnikov: {
      const __m256d inside = _mm256_cmp_pd(u2, one, _CMP_LT_OQ);
      const __m256d k = _mm256_mul_pd(_mm256_set1_pd(0.75), _mm256_sub_pd(one, u2));
      return _mm256_and_pd(inside, k);
    }
    case KernelFamily::quartic: {
      const __m256d inside = _mm256_cmp_pd(u2, one, _CMP_LT_OQ);
      const __m256d t = _mm256_sub_pd(one, u2);
      const __m256d k = _mm256_mul_pd(_mm256_set1_pd(0.9375), _mm256_mul_pd(t, t));
      return _mm256_and_pd(inside, k);
    }
    case KernelFamily::uniform: {
      const __m256d inside = _mm256_cmp_pd(u2, one, _CMP_LE_OQ);
      return _mm256_and_pd(inside, _mm256_set1_pd(0.5));
    }
  }
  return _mm256_setzero_pd();
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmin(__m256d v) {
  alignas(32) double a[4];
  _mm256_store_pd(a, v);
  return std::min(std::min(a[0], a[1]), std::min(a[2], a[3]));
}

inline double hmax(__m256d v) {
  alignas(32) double a[4];
  _mm256_store_pd(a, v);
  return std::max(std::max(a[0], a[1]), std::max(a[2], a[3]));
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

Moments1D accumulate_moments_1d(const Samples1D& s, double center, double inv_bandwidth, KernelFamily family) {
  const std::size_t n = s.x.size();
  const double* x = s.x.data();
  const double* y = s.y.data();
  const double* w = s.w.data();

  const __m256d c = _mm256_set1_pd(center);
  const __m256d ib = _mm256_set1_pd(inv_bandwidth);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d pinf = _mm256_set1_pd(kInf);
  const __m256d ninf = _mm256_set1_pd(-kInf);

  __m256d s0 = zero, s1 = zero, s2 = zero, t0 = zero, t1 = zero, cnt = zero;
  __m256d lo = pinf, hi = ninf;

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d yv = _mm256_loadu_pd(y + i);
    const __m256d wv = _mm256_loadu_pd(w + i);
    const __m256d dx = _mm256_sub_pd(xv, c);
    const __m256d kw = _mm256_mul_pd(kernel4(_mm256_mul_pd(dx, ib), family), wv);
    const __m256d pos = _mm256_cmp_pd(kw, zero, _CMP_GT_OQ);
    const __m256d kdx = _mm256_mul_pd(kw, dx);
    s0 = _mm256_add_pd(s0, kw);
    s1 = _mm256_add_pd(s1, kdx);
    s2 = _mm256_fmadd_pd(kdx, dx, s2);
    t0 = _mm256_fmadd_pd(kw, yv, t0);
    t1 = _mm256_fmadd_pd(kdx, yv, t1);
    cnt = _mm256_add_pd(cnt, _mm256_and_pd(pos, one));
    lo = _mm256_min_pd(lo, _mm256_blendv_pd(pinf, xv, pos));
    hi = _mm256_max_pd(hi, _mm256_blendv_pd(ninf, xv, pos));
  }

  Moments1D m;
  m.s0 = hsum(s0);
  m.s1 = hsum(s1);
  m.s2 = hsum(s2);
  m.t0 = hsum(t0);
  m.t1 = hsum(t1);
  m.count = hsum(cnt);
  double xmin = hmin(lo), xmax = hmax(hi);

  const Kernel1D kernel{family};
  for (; i < n; ++i) {
    const double dx = x[i] - center;
    const double kw = kernel(dx * inv_bandwidth) * w[i];
    if (!(kw > 0.0)) continue;
    m.s0 += kw;
    m.s1 += kw * dx;
    m.s2 += kw * dx * dx;
    m.t0 += kw * y[i];
    m.t1 += kw * dx * y[i];
    m.count += 1.0;
    xmin = std::min(xmin, x[i]);
    xmax = std::max(xmax, x[i]);
  }
  if (m.count > 0) {
    m.xmin = xmin;
    m.xmax = xmax;
  }
  return m;
}

Moments2D accumulate_moments_2d(const Samples2D& s, double c1, double c2, double inv_b1, double inv_b2,
                                KernelFamily family) {
  const std::size_t n = s.x1.size();
  const double* x1 = s.x1.data();
  const double* x2 = s.x2.data();
  const double* y = s.y.data();
  const double* w = s.w.data();

  const __m256d cv1 = _mm256_set1_pd(c1);
  const __m256d cv2 = _mm256_set1_pd(c2);
  const __m256d ib1 = _mm256_set1_pd(inv_b1);
  const __m256d ib2 = _mm256_set1_pd(inv_b2);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d pinf = _mm256_set1_pd(kInf);
  const __m256d ninf = _mm256_set1_pd(-kInf);

  __m256d s0 = zero, s1 = zero, s2 = zero, s11 = zero, s12 = zero, s22 = zero;
  __m256d t0 = zero, t1 = zero, t2 = zero, cnt = zero;
  __m256d lo1 = pinf, hi1 = ninf, lo2 = pinf, hi2 = ninf;

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xa = _mm256_loadu_pd(x1 + i);
    const __m256d xb = _mm256_loadu_pd(x2 + i);
    const __m256d yv = _mm256_loadu_pd(y + i);
    const __m256d wv = _mm256_loadu_pd(w + i);
    const __m256d d1 = _mm256_sub_pd(xa, cv1);
    const __m256d d2 = _mm256_sub_pd(xb, cv2);
    const __m256d k1 = kernel4(_mm256_mul_pd(d1, ib1), family);
    const __m256d k2 = kernel4(_mm256_mul_pd(d2, ib2), family);
    const __m256d kw = _mm256_mul_pd(_mm256_mul_pd(k1, k2), wv);
    const __m256d pos = _mm256_cmp_pd(kw, zero, _CMP_GT_OQ);
    const __m256d kd1 = _mm256_mul_pd(kw, d1);
    const __m256d kd2 = _mm256_mul_pd(kw, d2);
    s0 = _mm256_add_pd(s0, kw);
    s1 = _mm256_add_pd(s1, kd1);
    s2 = _mm256_add_pd(s2, kd2);
    s11 = _mm256_fmadd_pd(kd1, d1, s11);
    s12 = _mm256_fmadd_pd(kd1, d2, s12);
    s22 = _mm256_fmadd_pd(kd2, d2, s22);
    t0 = _mm256_fmadd_pd(kw, yv, t0);
    t1 = _mm256_fmadd_pd(kd1, yv, t1);
    t2 = _mm256_fmadd_pd(kd2, yv, t2);
    cnt = _mm256_add_pd(cnt, _mm256_and_pd(pos, one));
    lo1 = _mm256_min_pd(lo1, _mm256_blendv_pd(pinf, xa, pos));
    hi1 = _mm256_max_pd(hi1, _mm256_blendv_pd(ninf, xa, pos));
    lo2 = _mm256_min_pd(lo2, _mm256_blendv_pd(pinf, xb, pos));
    hi2 = _mm256_max_pd(hi2, _mm256_blendv_pd(ninf, xb, pos));
  }

  Moments2D m;
  m.s0 = hsum(s0);
  m.s1 = hsum(s1);
  m.s2 = hsum(s2);
  m.s11 = hsum(s11);
  m.s12 = hsum(s12);
  m.s22 = hsum(s22);
  m.t0 = hsum(t0);
  m.t1 = hsum(t1);
  m.t2 = hsum(t2);
  m.count = hsum(cnt);
  double x1min = hmin(lo1), x1max = hmax(hi1), x2min = hmin(lo2), x2max = hmax(hi2);

  const Kernel1D kernel{family};
  for (; i < n; ++i) {
    const double d1 = x1[i] - c1;
    const double d2 = x2[i] - c2;
    const double kw = kernel(d1 * inv_b1) * kernel(d2 * inv_b2) * w[i];
    if (!(kw > 0.0)) continue;
    m.s0 += kw;
    m.s1 += kw * d1;
    m.s2 += kw * d2;
    m.s11 += kw * d1 * d1;
    m.s12 += kw * d1 * d2;
    m.s22 += kw * d2 * d2;
    m.t0 += kw * y[i];
    m.t1 += kw * d1 * y[i];
    m.t2 += kw * d2 * y[i];
    m.count += 1.0;
    x1min = std::min(x1min, x1[i]);
    x1max = std::max(x1max, x1[i]);
    x2min = std::min(x2min, x2[i]);
    x2max = std::max(x2max, x2[i]);
  }
  if (m.count > 0) {
    m.x1min = x1min;
    m.x1max = x1max;
    m.x2min = x2min;
    m.x2max = x2max;
  }
  return m;
}

}  // namespace vcflr::simd::avx2
