#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace m3d::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalAbort = 3 };

/// Entry point shared by the m3d binary and the tests. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace m3d::cli
