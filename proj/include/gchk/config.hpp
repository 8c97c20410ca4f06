// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gchk/classifiers.hpp"
#include "gchk/evaluation.hpp"
#include "gchk/features.hpp"
#include "gchk/synth.hpp"
#include "json.hpp"

namespace gchk {

struct TrainConfig {
  Family family = Family::gbt;
  bool search = false;      // grid search before the final fit
  std::size_t folds = 5;    // grid-search folds
  double threshold = 0.5;   // stored in the detector
  nlohmann::json params = nlohmann::json::object();  // family hyperparameters, defaults fill the rest
  HyperGrid grid;
};

/// Everything a run depends on. Every key is optional in the JSON file; unknown keys
/// are rejected.
///
///   seed      u64 (0)
///   threads   worker count (hardware concurrency); never changes results
///   ads       top_x_percent (10), tau (3), layers ("all")
///   cgc       top_k_percent (5), layers ("all")
///   features  layer_subset (null); when set it overrides both ads.layers and cgc.layers
///   train     family ("gbt"), search (false), folds (5), threshold (0.5), params ({}),
///             grid {gbt: {max_depth, learning_rate, n_estimators}, rf: {max_depth, n_trees},
///                   mlp: {hidden, learning_rate, optimizer}, lr: {l2}}
///   eval      protocol ("kfold"), folds (5), test_fraction (0.1), threshold (0.5)
///   synth     see SynthConfig; signal_layers accepts the same forms as layers
///
/// Layer lists are "all", an array of layer indices, or a range string "a-b".
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = default_threads()
  AdsConfig ads;
  CgcConfig cgc;
  LayerSelection ads_layers;
  LayerSelection cgc_layers;
  std::optional<LayerSelection> layer_subset;
  TrainConfig train;
  EvalProtocol eval;
  SynthConfig synth;

  /// Feature settings with layer_subset applied.
  FeatureConfig features() const;
  Hyperparams train_params() const;
  std::size_t worker_count() const;
};

/// Throws UsageError naming the offending key path.
RunConfig parse_config(const nlohmann::json& document);
/// Missing file -> MissingInputError; malformed JSON -> FormatError.
RunConfig load_config(const std::string& path);

/// Parses "all", "3-6", "7" or a JSON array of integers.
LayerSelection parse_layers(const nlohmann::json& value, const std::string& key = "layers");
nlohmann::ordered_json to_json(const LayerSelection& layers);

/// Snapshot of every setting except `threads`, which never affects output.
nlohmann::ordered_json to_json(const RunConfig& config);
/// {"ads": {top_x_percent, tau, layers}, "cgc": {top_k_percent, layers}}; this is the
/// preprocessing snapshot stored in model files.
nlohmann::ordered_json to_json(const FeatureConfig& features);
FeatureConfig parse_feature_config(const nlohmann::json& snapshot);
nlohmann::ordered_json to_json(const SynthConfig& synth);
nlohmann::ordered_json to_json(const HyperGrid& grid);

}  // namespace gchk
