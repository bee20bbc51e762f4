#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace inslen::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one command. `args` excludes the program name. Data goes to --out or
/// `out`; diagnostics go to `err`. Verbosity follows INSLEN_LOG.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace inslen::cli
