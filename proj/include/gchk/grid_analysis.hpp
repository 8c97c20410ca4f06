// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gchk/grid.hpp"

namespace gchk {

/// 1 = foreground patch, 0 = background.
using ForegroundMask = Grid<std::uint8_t>;

/// ceil(percent/100 * total), clamped to [1, total]. Throws UsageError unless
/// 0 < percent <= 100.
std::size_t top_count(double percent, std::size_t total);

/// Indices of the `count` largest values, ordered by value descending and, among
/// equal values, by index ascending.
std::vector<std::size_t> top_indices(std::span<const double> values, std::size_t count);

/// Foreground = the top-x% patches by value; ties at the cutoff go to the lower
/// row-major index.
ForegroundMask top_x_mask(const Grid<double>& grid, double x_percent);

struct Component {
  std::vector<std::size_t> members;  // row-major patch indices, ascending
  bool valid = true;

  std::size_t area() const noexcept { return members.size(); }

  friend bool operator==(const Component&, const Component&) = default;
};

/// 8-connected components of a mask, ordered by their smallest member index.
struct ComponentSet {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Component> components;

  std::size_t valid_count() const noexcept;
  std::vector<std::size_t> areas() const;

  friend bool operator==(const ComponentSet&, const ComponentSet&) = default;
};

ComponentSet connected_components(const ForegroundMask& mask);

/// Marks components with area < tau invalid. The partition itself is kept.
/// Throws UsageError for tau == 0.
ComponentSet suppress_small(ComponentSet components, std::size_t tau);

}  // namespace gchk
