// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace gchk::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kMissingInput = 3;
inline constexpr int kFormat = 4;
inline constexpr int kDegenerate = 5;
inline constexpr int kInternal = 6;

/// Runs the command line; diagnostics go to `err`, help text to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gchk::cli
