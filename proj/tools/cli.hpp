#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dogr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Entry point of the `dogr` tool. `args` excludes the program name.
/// Subcommands: synth, vif, fit, predict, select-k, evaluate, report.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dogr::cli
