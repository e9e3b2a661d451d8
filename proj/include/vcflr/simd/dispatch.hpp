#pragma once

#include <optional>
#include <string>

namespace vcflr::simd {

enum class Isa { scalar, avx2 };

std::string to_string(Isa isa);

/// True when the running CPU and the build both support the instruction set.
bool isa_available(Isa isa);

/// Best instruction set for this CPU.
Isa detected_isa();

/// Instruction set used by the dispatching entry points.
Isa active_isa();

/// Pin dispatch to one instruction set (tests, benchmarks); nullopt restores
/// detection. Requests for unavailable sets fall back to scalar.
void set_isa_override(std::optional<Isa> isa);

}  // namespace vcflr::simd
