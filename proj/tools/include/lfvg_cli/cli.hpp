#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lfvg::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  ///< an asserted ordering did not hold
inline constexpr int kExitUsage = 2;    ///< bad arguments or unreadable input
inline constexpr int kExitNumeric = 3;  ///< non-finite loss or gradient

/// Runs one command. `args` excludes the program name, e.g.
/// {"synth", "--out", "store", "--videos", "50"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lfvg::cli
