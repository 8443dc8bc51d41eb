#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dscat::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kRuntimeError = 2 };

/// Runs one subcommand; args exclude the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dscat::cli
