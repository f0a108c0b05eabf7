#pragma once

#include <iosfwd>

namespace hessolve::cli {

// Exit codes shared by every subcommand.
enum ExitCode : int {
  ok = 0,
  usage_error = 1,  // parse, spec or contract errors
  numerical = 2,    // singular blocks, lost positivity, missing tail hook
  cap_hit = 3,
  drift_violation = 4,
};

// Entry point of the `hessolve` tool; argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hessolve::cli
