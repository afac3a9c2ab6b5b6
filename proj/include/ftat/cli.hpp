#pragma once

#include <iosfwd>

namespace ftat {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Entry point of the `ftat` command line tool.
///
/// Subcommands: train, synth, adapt, baseline, eval. Returns 0 on success, 1 on
/// usage errors and 2 on data or configuration errors. Log verbosity follows
/// the FTAT_LOG_LEVEL environment variable (trace, debug, info, warn, error,
/// off; default warn).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ftat
