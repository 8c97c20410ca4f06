// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gchk/cgc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gchk/grid_analysis.hpp"

namespace gchk {

namespace {

double norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sum);
}

}  // namespace

SimilarityMap similarity_map(const LayerSlice& slice) {
  const std::size_t dim = slice.embed_dim();
  const double token_norm = norm(slice.token_embedding);
  if (!(token_norm > 0.0)) throw DegenerateError("token embedding has zero norm");

  SimilarityMap map(slice.attention.height(), slice.attention.width());
  for (std::size_t p = 0; p < map.size(); ++p) {
    const auto row = slice.patch_row(p);
    const double patch_norm = norm(row);
    if (!(patch_norm > 0.0)) {
      throw DegenerateError("patch embedding " + std::to_string(p) + " has zero norm");
    }
    double dot = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      dot += static_cast<double>(slice.token_embedding[j]) * static_cast<double>(row[j]);
    }
    map[p] = std::clamp(dot / (token_norm * patch_norm), -1.0, 1.0);
  }
  return map;
}

double cgc_layer(const SimilarityMap& map, double top_k_percent) {
  const std::size_t count = top_count(top_k_percent, map.size());
  if (count == 0) throw UsageError("empty similarity map");
  double sum = 0.0;
  for (std::size_t p : top_indices(map.values(), count)) sum += map[p];
  return sum / static_cast<double>(count);
}

std::vector<double> cgc_vector(const TokenTrace& trace, const CgcConfig& config, const LayerSelection& layers) {
  std::vector<double> out;
  for (std::size_t position : layers.resolve(trace)) {
    const LayerSlice& slice = trace.layers[position];
    try {
      out.push_back(cgc_layer(similarity_map(slice), config.top_k_percent));
    } catch (const DegenerateError& e) {
      throw DegenerateError("layer " + std::to_string(slice.layer_index) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace gchk
