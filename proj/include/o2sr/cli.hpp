#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace o2sr {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitIo = 3,
    kExitDivergence = 4,
    kExitIncompatible = 5,
};

/// Runs the command line `args` (without the program name) in-process.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace o2sr
