#pragma once

#include <iosfwd>

namespace fpm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Subcommands run, partition, post and check. Returns 0 on success, 1 for
/// usage errors (bad arguments, missing or invalid config), 2 for failures
/// during the computation.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace fpm::cli
