// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gchk/ads.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gchk {

Grid<double> normalize_patch_attention(const PatchGrid& grid) {
  double total = 0.0;
  for (float v : grid.values()) total += static_cast<double>(v);
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateError("attention map has no positive finite mass");
  }
  Grid<double> out(grid.height(), grid.width());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = static_cast<double>(grid[i]) / total;
  return out;
}

double suppressed_mass(const Grid<double>& grid, const ComponentSet& components) {
  double mass = 0.0;
  for (const auto& component : components.components) {
    if (component.valid) continue;
    for (std::size_t p : component.members) mass += grid[p];
  }
  return mass;
}

double blob_mass(const Grid<double>& grid, const ComponentSet& components) {
  double total = 0.0;
  for (double v : grid.values()) total += v;
  double valid = 0.0;
  for (const auto& component : components.components) {
    if (!component.valid) continue;
    for (std::size_t p : component.members) valid += grid[p];
  }
  const double remaining = total - suppressed_mass(grid, components);
  if (!(remaining > 0.0) || valid <= 0.0) return 0.0;
  return std::clamp(valid / remaining, 0.0, 1.0);
}

double background_entropy(const Grid<double>& grid, const ForegroundMask& mask) {
  if (!grid.same_shape(mask)) throw UsageError("mask dimensions do not match the grid");
  if (grid.size() < 2) return 0.0;

  double background = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    if (!mask[p]) background += grid[p];
  }
  if (!(background > 0.0)) return 0.0;

  double entropy = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    if (mask[p]) continue;
    const double e = grid[p] / background;
    if (e > 0.0) entropy -= e * std::log(e);
  }
  return std::clamp(entropy / std::log(static_cast<double>(grid.size())), 0.0, 1.0);
}

AdsBreakdown ads_map(const PatchGrid& attention, const AdsConfig& config) {
  const Grid<double> normalized = normalize_patch_attention(attention);
  AdsBreakdown out;
  out.mask = top_x_mask(normalized, config.top_x_percent);
  out.components = suppress_small(connected_components(out.mask), config.tau);
  out.suppressed_mass = suppressed_mass(normalized, out.components);
  out.blob_mass = blob_mass(normalized, out.components);
  out.background_entropy = background_entropy(normalized, out.mask);
  out.ads = (1.0 - out.blob_mass) * out.background_entropy;
  return out;
}

AdsBreakdown ads_layer(const LayerSlice& slice, const AdsConfig& config) {
  try {
    AdsBreakdown out = ads_map(slice.attention, config);
    out.layer_index = slice.layer_index;
    return out;
  } catch (const DegenerateError& e) {
    throw DegenerateError("layer " + std::to_string(slice.layer_index) + ": " + e.what());
  }
}

std::vector<double> ads_vector(const TokenTrace& trace, const AdsConfig& config, const LayerSelection& layers) {
  std::vector<double> out;
  for (std::size_t position : layers.resolve(trace)) {
    out.push_back(ads_layer(trace.layers[position], config).ads);
  }
  return out;
}

}  // namespace gchk
