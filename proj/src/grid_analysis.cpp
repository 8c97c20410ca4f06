// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gchk/grid_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace gchk {

std::size_t top_count(double percent, std::size_t total) {
  if (!(percent > 0.0 && percent <= 100.0)) {
    throw UsageError("percentage must be in (0, 100], got " + std::to_string(percent));
  }
  if (total == 0) return 0;
  // percent * total is exact for integral percentages, so ceil sees the true quotient
  const double wanted = std::ceil(percent * static_cast<double>(total) / 100.0);
  return std::clamp<std::size_t>(static_cast<std::size_t>(wanted), 1, total);
}

std::vector<std::size_t> top_indices(std::span<const double> values, std::size_t count) {
  count = std::min(count, values.size());
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(), before);
  order.resize(count);
  return order;
}

ForegroundMask top_x_mask(const Grid<double>& grid, double x_percent) {
  const std::size_t count = top_count(x_percent, grid.size());
  ForegroundMask mask(grid.height(), grid.width(), 0);
  for (std::size_t index : top_indices(grid.values(), count)) mask[index] = 1;
  return mask;
}

std::size_t ComponentSet::valid_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(components.begin(), components.end(), [](const Component& c) { return c.valid; }));
}

std::vector<std::size_t> ComponentSet::areas() const {
  std::vector<std::size_t> out;
  out.reserve(components.size());
  for (const auto& c : components) out.push_back(c.area());
  return out;
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // The smaller root wins, so every root is the smallest index of its set.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

ComponentSet connected_components(const ForegroundMask& mask) {
  const std::size_t height = mask.height();
  const std::size_t width = mask.width();
  DisjointSets sets(mask.size());

  // Single raster pass: join each foreground patch with its already-visited
  // 8-neighbours (west, north-west, north, north-east).
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      if (!mask.at(r, c)) continue;
      const std::size_t here = r * width + c;
      if (c > 0 && mask.at(r, c - 1)) sets.unite(here, here - 1);
      if (r == 0) continue;
      const std::size_t up = here - width;
      if (c > 0 && mask.at(r - 1, c - 1)) sets.unite(here, up - 1);
      if (mask.at(r - 1, c)) sets.unite(here, up);
      if (c + 1 < width && mask.at(r - 1, c + 1)) sets.unite(here, up + 1);
    }
  }

  ComponentSet result;
  result.height = height;
  result.width = width;
  std::vector<std::size_t> slot(mask.size(), SIZE_MAX);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const std::size_t root = sets.find(i);
    if (slot[root] == SIZE_MAX) {
      slot[root] = result.components.size();
      result.components.emplace_back();
    }
    result.components[slot[root]].members.push_back(i);
  }
  return result;
}

ComponentSet suppress_small(ComponentSet components, std::size_t tau) {
  if (tau == 0) throw UsageError("tau must be at least 1 patch");
  for (auto& component : components.components) component.valid = component.area() >= tau;
  return components;
}

}  // namespace gchk
