#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gkr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitNumeric = 2;

/// Runs one `gkr` command line. Reports and tables go to `out`, diagnostics
/// to `err`. Returns 0 on success, 1 on invalid input, 2 on numeric failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
/// Same, with args[0] as the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gkr::cli
