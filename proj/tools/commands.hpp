// SPDX-License-Identifier: Apache-2.0
#pragma once

// The flashvit command-line front end, as a library so tests can drive it.

#include <iosfwd>
#include <string>
#include <vector>

namespace flashvit::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitMismatch = 1,
  kExitFlagError = 2,
  kExitInfeasible = 3,
  kExitBeamExhausted = 4,
  kExitIo = 5,
};

/// Parses `args` (without the program name) and runs the chosen subcommand.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Fixed column order of sweep output.
const std::vector<std::string>& sweep_columns();

}  // namespace flashvit::cli
