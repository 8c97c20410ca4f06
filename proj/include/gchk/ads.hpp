// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "gchk/grid_analysis.hpp"
#include "gchk/trace.hpp"

namespace gchk {

// Attention Dispersion Score.
//
// For one token at one layer the patch attention is normalized to a distribution,
// the top-x% patches form the foreground, foreground patches are grouped into
// 8-connected blobs and blobs smaller than tau are discarded as attention sinks.
// Then
//
//   m    = mass of the surviving blobs, as a fraction of the patch mass left after
//          the discarded sink blobs are removed
//   H^   = Shannon entropy of the background (non-foreground) attention,
//          renormalized over the background, divided by log |P|
//   ADS  = (1 - m) * H^
//
// Low ADS means a compact, well-grounded focus; high ADS means scattered attention.

struct AdsConfig {
  double top_x_percent = 10.0;
  std::size_t tau = 3;

  friend bool operator==(const AdsConfig&, const AdsConfig&) = default;
};

struct AdsBreakdown {
  int layer_index = 0;
  ForegroundMask mask;
  ComponentSet components;
  double suppressed_mass = 0.0;
  double blob_mass = 0.0;
  double background_entropy = 0.0;
  double ads = 0.0;
};

/// Scales attention to sum to 1 in double precision. All-zero (or non-finite) total
/// mass is a DegenerateError.
Grid<double> normalize_patch_attention(const PatchGrid& grid);

/// Total grid value over invalid (suppressed) components.
double suppressed_mass(const Grid<double>& grid, const ComponentSet& components);

/// Mass of valid components relative to the mass that remains once suppressed
/// components are removed. 0 when nothing valid remains. Always in [0, 1].
double blob_mass(const Grid<double>& grid, const ComponentSet& components);

/// Normalized entropy of the background distribution, in [0, 1]. Uses 0 log 0 = 0;
/// an empty or zero-mass background gives 0.
double background_entropy(const Grid<double>& grid, const ForegroundMask& mask);

/// Full pipeline on one attention map.
AdsBreakdown ads_map(const PatchGrid& attention, const AdsConfig& config);

AdsBreakdown ads_layer(const LayerSlice& slice, const AdsConfig& config);

/// One ADS value per selected layer, in trace order. Degenerate layers are reported
/// with their layer index.
std::vector<double> ads_vector(const TokenTrace& trace, const AdsConfig& config,
                               const LayerSelection& layers = LayerSelection::all());

}  // namespace gchk
