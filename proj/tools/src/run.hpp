#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qpww::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitConfig = 3;
/// Unexpected failures (I/O, internal errors).
inline constexpr int kExitInternal = 1;

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "QPWW_OUTPUT_ROOT";

/// Runs one subcommand. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qpww::cli
