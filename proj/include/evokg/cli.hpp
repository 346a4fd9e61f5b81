#pragma once

// Command-line front end. The executable and the tests share this entry.

#include <ostream>
#include <string>
#include <vector>

namespace evokg {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evokg
