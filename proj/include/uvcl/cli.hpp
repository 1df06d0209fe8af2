#pragma once

#include <string>
#include <vector>

namespace uvcl::cli {

// Runs the command-line front end. `args` excludes the program name. Returns
// the process exit code: 0 on success, 1 on a runtime failure, 2 on bad usage.
int run(std::vector<std::string> args);

}  // namespace uvcl::cli
