// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gchk/evaluation.hpp"
#include "gchk/features.hpp"
#include "gchk/models.hpp"
#include "json.hpp"

namespace gchk {

/// A fitted classifier together with everything needed to score new rows.
struct TrainedDetector {
  Hyperparams params;
  std::vector<std::string> feature_names;
  Standardizer standardizer;
  double threshold = 0.5;
  /// JSON snapshot of the feature settings that produced the training columns.
  std::string preprocessing = "{}";
  ModelPayload model;

  Family family() const noexcept { return family_of(params); }
};

/// Deterministic in (dataset, params, seed). Throws DegenerateError for a
/// single-class dataset or non-finite features.
TrainedDetector train(const Dataset& dataset, const Hyperparams& params, std::uint64_t seed,
                      std::size_t threads = 1);

/// P(hallucinated) per row. The dataset's columns must match the detector's layout
/// exactly; a mismatch is a ConsistencyError naming missing and extra columns.
std::vector<double> predict_proba(const TrainedDetector& detector, const Dataset& dataset);

/// Same, for one row already in the detector's layout.
double predict_proba(const TrainedDetector& detector, std::span<const double> row);

/// Boosting only: probabilities using the first `estimators` trees.
std::vector<double> staged_proba(const TrainedDetector& detector, const Dataset& dataset,
                                 std::size_t estimators);

/// Forest only: each tree's probability for one row (their mean is the prediction).
std::vector<double> tree_probabilities(const TrainedDetector& detector, std::span<const double> row);

/// Grid of hyperparameter values per family. LR only sweeps the L2 strength.
struct HyperGrid {
  std::vector<double> lr_l2{1e-4, 1e-2, 1.0};
  std::vector<std::size_t> gbt_depth{4, 6, 8};
  std::vector<double> gbt_learning_rate{0.1, 0.05};
  std::vector<std::size_t> gbt_estimators{100, 200, 500};
  std::vector<std::optional<std::size_t>> rf_depth{std::nullopt, 10, 20};
  std::vector<std::size_t> rf_trees{200, 400, 600};
  std::vector<std::size_t> mlp_hidden{64, 128, 256};
  std::vector<double> mlp_learning_rate{0.01, 0.001};
  std::vector<Optimizer> mlp_optimizer{Optimizer::adam, Optimizer::sgd};

  /// Cartesian product in declaration order (last list varies fastest), starting
  /// from default_params(family) for the knobs the grid does not cover.
  std::vector<Hyperparams> enumerate(Family family) const;

  friend bool operator==(const HyperGrid&, const HyperGrid&) = default;
};

struct GridPoint {
  Hyperparams params;
  std::vector<double> fold_f1;
  std::vector<double> fold_auc;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  double mean_auc = 0.0;
};

struct GridSearchResult {
  std::size_t best_index = 0;
  Hyperparams best;
  std::vector<GridPoint> points;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
};

/// Stratified k-fold CV for every point (same folds for all points); the winner has
/// the highest mean hallucination-class F1, ties going to the earliest point.
/// Throws DegenerateError when a class has fewer rows than folds.
GridSearchResult grid_search(const Dataset& dataset, std::span<const Hyperparams> points,
                             std::size_t folds, std::uint64_t seed, std::size_t threads = 1);

GridSearchResult grid_search(const Dataset& dataset, Family family, const HyperGrid& grid,
                             std::size_t folds, std::uint64_t seed, std::size_t threads = 1);

/// Training closure for evaluate().
FitFn fit_with(const Hyperparams& params);
/// Ignores the training split and scores with an existing detector.
FitFn use_detector(TrainedDetector detector);

nlohmann::ordered_json params_to_json(const Hyperparams& params);
/// Starts from the family defaults; unknown keys are a UsageError.
Hyperparams params_from_json(Family family, const nlohmann::json& object);
nlohmann::ordered_json to_json(const GridSearchResult& result);

inline constexpr char kModelMagic[4] = {'G', 'C', 'M', 'D'};
inline constexpr std::uint16_t kModelVersion = 1;

/// Binary container: "GCMD", u16 LE version, u8 family tag, u64 LE body length,
/// then layout, standardization, hyperparameters and model parameters (f64 LE).
std::vector<std::uint8_t> serialize_model(const TrainedDetector& detector);
TrainedDetector deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const TrainedDetector& detector, const std::string& path);
TrainedDetector load_model(const std::string& path);

}  // namespace gchk
