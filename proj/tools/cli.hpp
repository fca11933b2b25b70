#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mission::cli {

/// Exit codes: 0 success, 1 domain error, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Run one command line (without the program name). Normal output goes to
/// `out` unless --output redirects it; diagnostics go to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mission::cli
