#pragma once

#include <array>
#include <string>
#include <vector>

namespace aggrex {

// Full command-line surface. Returns the process exit code: 0 success,
// 2 configuration errors, 3 data errors, 4 sampler failures, 5 diagnostics
// failures, 1 anything else.
int run_cli(int argc, const char* const* argv);

// (command, flag, help text) for every option; lets tests verify the parser
// table documents each flag.
std::vector<std::array<std::string, 3>> cli_option_docs();

}  // namespace aggrex
