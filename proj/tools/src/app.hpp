#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bpdq::app {

// Exit codes of the bpdq command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitTheoryFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

/// Runs one command line (args excludes the program name). Reports go to
/// --report when given, otherwise to out; diagnostics go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bpdq::app
