// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "gchk/grid.hpp"
#include "gchk/trace.hpp"

namespace gchk {

// Cross-modal Grounding Consistency: mean of the top-k% cosine similarities between
// the token hidden state and the patch hidden states of the same layer.

/// Cosine similarity of the token embedding with each patch, on the patch grid.
using SimilarityMap = Grid<double>;

struct CgcConfig {
  double top_k_percent = 5.0;

  friend bool operator==(const CgcConfig&, const CgcConfig&) = default;
};

/// Throws DegenerateError naming the token or the patch index when a vector has zero norm.
SimilarityMap similarity_map(const LayerSlice& slice);

/// Mean of the ceil(k/100 * |P|) largest similarities. The selected values are summed
/// in descending order (ties by row-major index).
double cgc_layer(const SimilarityMap& map, double top_k_percent);

std::vector<double> cgc_vector(const TokenTrace& trace, const CgcConfig& config,
                               const LayerSelection& layers = LayerSelection::all());

}  // namespace gchk
