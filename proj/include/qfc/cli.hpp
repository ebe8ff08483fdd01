#pragma once

namespace qfc::cli {

// Subcommands: train-kb, run, compare, qga-select, surface.
// Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.
int run_cli(int argc, const char* const* argv);

}  // namespace qfc::cli
