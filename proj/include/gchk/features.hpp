// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gchk/ads.hpp"
#include "gchk/bundle.hpp"
#include "gchk/cgc.hpp"

namespace gchk {

/// Everything that determines a token's feature vector.
struct FeatureConfig {
  AdsConfig ads;
  CgcConfig cgc;
  LayerSelection ads_layers;
  LayerSelection cgc_layers;

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

struct FeatureRow {
  std::string token_id;
  std::vector<double> values;
  Label label = Label::unknown;
};

/// Labeled feature rows. Layout: [ADS block | CGC block], each in layer order,
/// named "ads_L<layer>" / "cgc_L<layer>".
struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<FeatureRow> rows;

  std::size_t size() const noexcept { return rows.size(); }
  std::size_t width() const noexcept { return feature_names.size(); }

  /// {grounded, hallucinated} counts.
  std::array<std::size_t, 2> class_counts() const;

  /// 1 for hallucinated, 0 for grounded.
  std::vector<int> targets() const;

  /// Rows in the given order (indices may repeat).
  Dataset subset(std::span<const std::size_t> indices) const;

  /// Keeps only the named columns, in the given order. Throws UsageError on unknown names.
  Dataset select_columns(std::span<const std::string> names) const;
};

/// Values and labels compared exactly; token ids are ignored (CSV does not carry them).
bool same_content(const Dataset& a, const Dataset& b);

std::vector<std::string> feature_names(const TokenTrace& reference, const FeatureConfig& config);

/// [ADS | CGC] for one token. Metric errors are rethrown with the token id.
std::vector<double> token_features(const TokenTrace& trace, const FeatureConfig& config);

/// One row per labeled token, in bundle order. With `labels`, the label map decides
/// which tokens are used and their labels; ids missing from the bundle are an error
/// listing every such id. Without it, the bundle's own labels are used. Tokens
/// labeled unknown are skipped.
Dataset build_features(std::span<const TokenTrace> traces, const LabelMap* labels,
                       const FeatureConfig& config, std::size_t threads = 1);

/// CSV: header is feature names then "label"; values use the shortest decimal form
/// that reads back to the same double.
void export_dataset(const Dataset& dataset, const std::string& path);
std::string dataset_to_csv(const Dataset& dataset);

/// Validates row width and the label vocabulary (errors name the 1-based line).
Dataset import_dataset(const std::string& path);
Dataset dataset_from_csv(const std::string& text, const std::string& source = "<csv>");

}  // namespace gchk
