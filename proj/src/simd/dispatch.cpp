#include "vcflr/simd/dispatch.hpp"

#include <atomic>

#include "vcflr/simd/moments.hpp"

namespace vcflr::simd {
namespace {

// -1: no override, otherwise the Isa value.
std::atomic<int> g_override{-1};

bool cpu_has_avx2() {
#if defined(VCFLR_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

}  // namespace

std::string to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) {
  static const bool avx2 = cpu_has_avx2();
  return isa == Isa::scalar || (isa == Isa::avx2 && avx2);
}

Isa detected_isa() { return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar; }

Isa active_isa() {
  const int o = g_override.load(std::memory_order_relaxed);
  if (o < 0) return detected_isa();
  const auto isa = static_cast<Isa>(o);
  return isa_available(isa) ? isa : Isa::scalar;
}

void set_isa_override(std::optional<Isa> isa) {
  g_override.store(isa ? static_cast<int>(*isa) : -1, std::memory_order_relaxed);
}

Moments1D accumulate_moments_1d(const Samples1D& s, double center, double inv_bandwidth, KernelFamily family) {
#if defined(VCFLR_HAVE_AVX2)
  if (active_isa() == Isa::avx2) return avx2::accumulate_moments_1d(s, center, inv_bandwidth, family);
#endif
  return scalar::accumulate_moments_1d(s, center, inv_bandwidth, family);
}

Moments2D accumulate_moments_2d(const Samples2D& s, double c1, double c2, double inv_b1, double inv_b2,
                                KernelFamily family) {
#if defined(VCFLR_HAVE_AVX2)
  if (active_isa() == Isa::avx2) return avx2::accumulate_moments_2d(s, c1, c2, inv_b1, inv_b2, family);
#endif
  return scalar::accumulate_moments_2d(s, c1, c2, inv_b1, inv_b2, family);
}

}  // namespace vcflr::simd
