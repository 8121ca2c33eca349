#pragma once

#include <iosfwd>

namespace huh {

inline constexpr int kExitOk = 0;
inline constexpr int kExitOperational = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `huh` tool. Subcommands: ingest, punctuate, segment,
// generate, export, serve, emissions, demo-fixture. Settings resolve as
// flag > HUH_<KEY> environment variable > --config JSON file > default.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace huh
