#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fcseg::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kIo = 2,
  kDomain = 3,
};

/// Runs the command line `args` (args[0] is the program name) and returns
/// the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fcseg::cli
