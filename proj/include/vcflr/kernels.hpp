#pragma once

#include <string>
#include <string_view>

namespace vcflr {

/// Compactly supported kernels on [-1, 1], all of order (0, 2).
enum class KernelFamily { epanechnikov, quartic, uniform };

KernelFamily parse_kernel_family(std::string_view name);
std::string to_string(KernelFamily family);

struct Kernel1D {
  KernelFamily family = KernelFamily::epanechnikov;

  double operator()(double u) const;
};

/// Product kernel κ₂(u, v) = κ(u)·κ(v).
struct Kernel2D {
  Kernel1D first;
  Kernel1D second;

  double operator()(double u, double v) const { return first(u) * second(v); }
};

double kernel_eval(const Kernel1D& k, double u);

}  // namespace vcflr
