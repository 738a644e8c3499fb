#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace twdtw::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Runs the command line `args` (args[0] is the program name) and returns
/// the process exit code. All output goes to `out` / `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace twdtw::cli
