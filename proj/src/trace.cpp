// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gchk/trace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gchk {

std::string_view to_string(Label label) noexcept {
  switch (label) {
    case Label::grounded: return "grounded";
    case Label::hallucinated: return "hallucinated";
    case Label::unknown: return "unknown";
  }
  return "unknown";
}

Label parse_label(std::string_view text) {
  if (text == "grounded") return Label::grounded;
  if (text == "hallucinated") return Label::hallucinated;
  if (text == "unknown") return Label::unknown;
  throw FormatError("unknown label '" + std::string(text) + "'");
}

namespace {

[[noreturn]] void reject(const TokenTrace& trace, const std::string& why) {
  throw InvariantError("token '" + trace.token_id + "': " + why);
}

}  // namespace

void validate(const TokenTrace& trace) {
  if (trace.layers.empty()) reject(trace, "no layers");
  const LayerSlice& first = trace.layers.front();
  const std::size_t patches = first.attention.size();
  const std::size_t dim = first.embed_dim();
  if (first.attention.height() == 0 || first.attention.width() == 0) {
    reject(trace, "empty attention grid");
  }
  if (dim == 0) reject(trace, "empty token embedding");

  for (std::size_t i = 0; i < trace.layers.size(); ++i) {
    const LayerSlice& slice = trace.layers[i];
    const std::string where = "layer " + std::to_string(slice.layer_index) + ": ";
    if (i > 0 && slice.layer_index <= trace.layers[i - 1].layer_index) {
      reject(trace, where + "layer indices must be strictly increasing");
    }
    if (!slice.attention.same_shape(first.attention)) {
      reject(trace, where + "grid dimensions differ between layers");
    }
    if (slice.embed_dim() != dim) reject(trace, where + "embedding dimension differs between layers");
    if (slice.patch_embeddings.size() != patches * dim) {
      reject(trace, where + "patch embedding matrix is not |P| x d");
    }
    for (std::size_t p = 0; p < patches; ++p) {
      const float v = slice.attention[p];
      if (!std::isfinite(v) || v < 0.0f) {
        reject(trace, where + "attention at patch " + std::to_string(p) + " is negative or not finite");
      }
    }
    auto finite = [](float v) { return std::isfinite(v); };
    if (!std::all_of(slice.token_embedding.begin(), slice.token_embedding.end(), finite)) {
      reject(trace, where + "token embedding is not finite");
    }
    if (!std::all_of(slice.patch_embeddings.begin(), slice.patch_embeddings.end(), finite)) {
      reject(trace, where + "patch embeddings are not finite");
    }
  }
}

std::vector<std::size_t> LayerSelection::resolve(const TokenTrace& trace) const {
  std::vector<std::size_t> positions;
  if (!layers_) {
    positions.resize(trace.layers.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    return positions;
  }
  std::vector<int> wanted = *layers_;
  std::sort(wanted.begin(), wanted.end());
  wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
  for (int layer : wanted) {
    auto it = std::find_if(trace.layers.begin(), trace.layers.end(),
                           [layer](const LayerSlice& s) { return s.layer_index == layer; });
    if (it == trace.layers.end()) {
      throw UsageError("layer " + std::to_string(layer) + " is not present in token '" +
                       trace.token_id + "'");
    }
    positions.push_back(static_cast<std::size_t>(it - trace.layers.begin()));
  }
  return positions;
}

}  // namespace gchk
