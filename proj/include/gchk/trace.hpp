// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gchk/grid.hpp"

namespace gchk {

/// Token class. Hallucinated is the positive class everywhere.
enum class Label { grounded, hallucinated, unknown };

std::string_view to_string(Label label) noexcept;

/// Parses "grounded" / "hallucinated" / "unknown"; throws FormatError otherwise.
Label parse_label(std::string_view text);

/// Introspection data for one token at one decoder layer.
struct LayerSlice {
  int layer_index = 0;
  PatchGrid attention;
  std::vector<float> token_embedding;
  /// |P| x d, row p is the hidden state at patch p (row-major over the grid).
  std::vector<float> patch_embeddings;

  std::size_t embed_dim() const noexcept { return token_embedding.size(); }
  std::size_t patch_count() const noexcept { return attention.size(); }

  std::span<const float> patch_row(std::size_t patch) const {
    return std::span<const float>(patch_embeddings).subspan(patch * embed_dim(), embed_dim());
  }

  friend bool operator==(const LayerSlice&, const LayerSlice&) = default;
};

/// Records which generated tokens fed the attention and embedding streams when they
/// differ (yes/no probing reads attention at the answer and embeddings at the object).
struct TokenPairing {
  std::string attention_token;
  std::string embedding_token;

  friend bool operator==(const TokenPairing&, const TokenPairing&) = default;
};

struct TokenTrace {
  std::string token_id;
  std::string object_text;
  Label label = Label::unknown;
  std::vector<LayerSlice> layers;
  std::optional<TokenPairing> pairing;

  std::size_t num_layers() const noexcept { return layers.size(); }

  friend bool operator==(const TokenTrace&, const TokenTrace&) = default;
};

/// Throws InvariantError naming the token when any structural invariant fails:
/// non-empty layers with strictly increasing indices, shared grid and embedding
/// dimensions, non-negative finite attention, finite embeddings.
void validate(const TokenTrace& trace);

/// Which layers of a trace feed a feature block. Empty optional means all layers.
class LayerSelection {
 public:
  LayerSelection() = default;
  explicit LayerSelection(std::vector<int> layer_indices) : layers_(std::move(layer_indices)) {}

  static LayerSelection all() { return {}; }

  bool is_all() const noexcept { return !layers_.has_value(); }
  const std::optional<std::vector<int>>& layers() const noexcept { return layers_; }

  /// Positions into trace.layers, in trace order. Throws UsageError for layers the
  /// trace does not carry.
  std::vector<std::size_t> resolve(const TokenTrace& trace) const;

  friend bool operator==(const LayerSelection&, const LayerSelection&) = default;

 private:
  std::optional<std::vector<int>> layers_;
};

}  // namespace gchk
