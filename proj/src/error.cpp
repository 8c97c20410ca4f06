// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gchk/error.hpp"

namespace gchk {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::missing_input: return "missing_input";
    case ErrorKind::format: return "format";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::internal: return "internal";
  }
  return "internal";
}

}  // namespace gchk
