#pragma once

// Command-line front end. run_cli() is the whole program minus argv handling,
// so tests can drive every subcommand in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace face_manifold::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntimeError = 1;
inline constexpr int kExitUsageError = 2;

/// `args` excludes the program name. Progress goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

const char* version();

}  // namespace face_manifold::cli
