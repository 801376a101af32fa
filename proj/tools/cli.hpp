#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rapc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitNumerical = 2;

/// Runs one command line (args[0] is the program name). Output files go to
/// disk; without --out a command writes its CSV to `out`. Diagnostics go to
/// `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rapc::cli
