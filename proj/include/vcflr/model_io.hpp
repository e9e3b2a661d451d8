#pragma once

#include <filesystem>
#include <iosfwd>

#include "vcflr/model.hpp"

namespace vcflr {

/// JSON document with `format_version` 1; surfaces stored row-major.
void write_model(std::ostream& out, const FittedModel& model);
void save_model(const std::filesystem::path& path, const FittedModel& model);

/// Throws FormatError on malformed JSON, a missing or unsupported
/// format_version, or inconsistent array sizes.
FittedModel read_model(std::istream& in);
FittedModel load_model(const std::filesystem::path& path);

}  // namespace vcflr
