#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace asf::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kRuntime = 2 };

// Entry point of the `asf` tool. `args` excludes the program name.
// Results go to `out` as JSON, diagnostics to `err` as "error: <Kind>: ...".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace asf::cli
