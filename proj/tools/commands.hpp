#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vppe::cli {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vppe::cli
