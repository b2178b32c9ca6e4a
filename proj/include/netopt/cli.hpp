#pragma once

#include <ostream>

namespace netopt::cli {

/// Process exit statuses.
enum ExitCode : int {
  ok = 0,
  /// Solver failure or another runtime error during a run.
  runtime_failure = 1,
  /// Bad command line or invalid scenario.
  invalid_input = 2,
  /// A file could not be read or written.
  io_failure = 3,
};

/// Entry point shared by the executable and the tests. argv[0] is the program
/// name. Diagnostics go to `err`, reports to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace netopt::cli
