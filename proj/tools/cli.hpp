#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crysdiff::cli {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2 };

/// Parses and runs one invocation. Progress and reports go to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace crysdiff::cli
