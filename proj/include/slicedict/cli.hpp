#pragma once

#include <string>
#include <vector>

namespace slicedict::cli {

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kUsageError = 2 };

/// Entry point of the `slicedict` tool; args excludes the program name.
int run(const std::vector<std::string>& args);

} // namespace slicedict::cli
