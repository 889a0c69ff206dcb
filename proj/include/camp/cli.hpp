#pragma once

#include <string>
#include <vector>

namespace camp {

/// Full command-line entry point. Returns the process exit code: 0 on
/// success, 2 for usage/validation errors, 1 for runtime failures. Errors
/// print one machine-readable line on stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace camp
