#pragma once

#include <string>
#include <vector>

namespace strokeforge::cli {

/// Exit codes: 0 success, 1 validation error (bad flag, missing file,
/// malformed config or data), 2 internal error.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace strokeforge::cli
