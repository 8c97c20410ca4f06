// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace gchk {

/// Default worker count: the hardware concurrency, at least 1.
std::size_t default_threads() noexcept;

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index runs
/// exactly once; callers write results into per-index slots so output order never
/// depends on scheduling. If any call throws, the exception from the lowest
/// failing index is rethrown after all workers finish.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace gchk
