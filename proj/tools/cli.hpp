#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vcflr::cli {

/// Runs one command line (argv[0] excluded). Returns the process exit code:
/// 0 ok, 2 usage, 3 data or occupancy, 4 format, 5 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vcflr::cli
