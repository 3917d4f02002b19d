#pragma once

#include <iosfwd>

namespace polexp::cli {

/// Exit codes: 0 success, 1 runtime failure or --verify mismatch, 2 bad config or usage.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// The whole command-line program, with its streams injectable for tests.
int run_app(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace polexp::cli
