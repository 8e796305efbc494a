// SPDX-License-Identifier: Apache-2.0

#ifndef ATLAS_TOOLS_CLI_HPP
#define ATLAS_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace atlas::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one subcommand. `args` excludes the program name. Exit codes: 0 on
/// success, 1 on validation errors (bad flags, bad config, malformed input
/// files), 2 on runtime failures.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace atlas::cli

#endif  // ATLAS_TOOLS_CLI_HPP
