#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wncs::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kInvalidConfig = 2,
  kNotStabilizable = 3,
  kInternalFailure = 4,
};

// Runs one subcommand; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "LO:HI" inclusive.
std::vector<int> parse_h_range(const std::string& text);
// Comma-separated values; an entry may also be LO:STEP:HI.
std::vector<double> parse_p_grid(const std::string& text);

}  // namespace wncs::cli
