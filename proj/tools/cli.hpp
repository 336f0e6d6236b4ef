// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace varfield::cli {

/// Exit codes of the varfield tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitError = 2;

/// Runs the varfield command line with argv[0] as program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace varfield::cli
