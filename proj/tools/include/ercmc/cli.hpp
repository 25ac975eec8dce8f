#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ercmc {

// Process exit codes shared by every command.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

// Runs one command line (program name excluded). Never throws; failures are
// reported on `err` and mapped onto an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ercmc
