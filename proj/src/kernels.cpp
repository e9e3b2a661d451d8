#include "vcflr/kernels.hpp"

#include "vcflr/error.hpp"

namespace vcflr {

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "epanechnikov") return KernelFamily::epanechnikov;
  if (name == "quartic") return KernelFamily::quartic;
  if (name == "uniform") return KernelFamily::uniform;
  throw Error(ErrorKind::invalid_argument, "unknown kernel family '" + std::string(name) + "'");
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::epanechnikov: return "epanechnikov";
    case KernelFamily::quartic: return "quartic";
    case KernelFamily::uniform: return "uniform";
  }
  return "unknown";
}

double kernel_eval(const Kernel1D& k, double u) {
  const double u2 = u * u;
  switch (k.family) {
    case KernelFamily::epanechnikov:
      return u2 < 1.0 ? 0.75 * (1.0 - u2) : 0.0;
    case KernelFamily::quartic: {
      if (!(u2 < 1.0)) return 0.0;
      const double t = 1.0 - u2;
      return 0.9375 * (t * t);
    }
    case KernelFamily::uniform:
      return u2 <= 1.0 ? 0.5 : 0.0;
  }
  return 0.0;
}

double Kernel1D::operator()(double u) const { return kernel_eval(*this, u); }

}  // namespace vcflr
