#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lvcox::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs the command line `args` (program name excluded). CSV output that has
// no --out target goes to `out`; the resolved config, progress and errors
// go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lvcox::cli
