#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cfrec {

/// Runs the command line driver in-process. Returns the process exit code:
/// 0 success, 1 usage error, 2 data error, 3 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out);
int run_cli(const std::vector<std::string>& args);

}  // namespace cfrec
