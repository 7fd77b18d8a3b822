#pragma once

#include <ostream>

namespace rahtpc {

// Exit codes of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;  // conditioning, prediction, training failures
inline constexpr int kExitUsage = 2;    // usage, parse, validation, I/O and stream errors

// Entry point of the `rahtpc` tool with encode, decode, eval and train
// subcommands. Never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rahtpc
