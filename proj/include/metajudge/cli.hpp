#pragma once

#include <string>
#include <vector>

namespace metajudge::cli {

/// Dispatches one subcommand invocation. args excludes the program name.
/// Exit codes: 0 success, 1 record-level/runtime failure, 2 configuration
/// error (including unknown flags).
int run_cli(const std::vector<std::string>& args);

/// Main help plus every subcommand's help; frozen by a golden-file test.
std::string help_text();

}  // namespace metajudge::cli
