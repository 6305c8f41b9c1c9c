// SPDX-License-Identifier: Apache-2.0
//
// The `einv` command line: synth, train, compress, cost, bench, sweep, eval.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace einv::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 success, 1 the command failed, 2 bad usage.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace einv::cli
