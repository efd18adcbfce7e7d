#pragma once

#include <iosfwd>

namespace capcon::cli {

/// Exit codes of the command-line driver.
enum ExitCode : int {
    Success = 0,
    ConfigError = 1,
    NotConverged = 2,
    CompareFailed = 3,
};

/// Parses argv and runs one subcommand. Tables go to `out` unless --output is given.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace capcon::cli
