// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ICPX_CLI_HPP
#define ICPX_CLI_HPP

#include <iosfwd>

namespace icpx {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;

/// The `icpx` command line. Subcommands: register, explain, experiment,
/// synth. Results go to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace icpx

#endif  // ICPX_CLI_HPP
