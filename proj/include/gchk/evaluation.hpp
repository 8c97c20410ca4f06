// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gchk/features.hpp"
#include "json.hpp"

namespace gchk {

// Labels are 1 = hallucinated (positive), 0 = grounded.

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

Confusion confusion(std::span<const int> labels, std::span<const int> predictions);

/// Probability that a random positive outranks a random negative, ties counting 1/2
/// (computed from mid-ranks in O(n log n)). Throws DegenerateError unless both
/// classes are present.
double auc(std::span<const int> labels, std::span<const double> scores);

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  Confusion confusion;
};

/// Thresholded metrics (score >= threshold predicts hallucinated) plus AUC.
Metrics compute_metrics(std::span<const int> labels, std::span<const double> scores, double threshold);

/// Fold id in [0, k) for every row. Each class is shuffled and dealt round-robin,
/// continuing where the previous class stopped, so per-fold class counts differ by
/// at most one. Requires 2 <= k <= rows.
std::vector<std::size_t> stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per class, round(test_fraction * count) rows (at least one, at most count - 1)
/// go to the test side.
Split stratified_holdout(std::span<const int> labels, double test_fraction, std::uint64_t seed);

std::vector<Split> kfold_splits(std::span<const int> labels, std::size_t k, std::uint64_t seed);

enum class Protocol { holdout, kfold };

std::string_view to_string(Protocol protocol) noexcept;
Protocol parse_protocol(std::string_view text);

struct EvalProtocol {
  Protocol kind = Protocol::kfold;
  std::size_t folds = 5;
  double test_fraction = 0.1;
  double threshold = 0.5;

  friend bool operator==(const EvalProtocol&, const EvalProtocol&) = default;
};

/// Scores rows of a dataset; higher means more likely hallucinated.
using ScoreFn = std::function<std::vector<double>(const Dataset&)>;
/// Fits on a training split and returns the resulting scorer.
using FitFn = std::function<ScoreFn(const Dataset& train, std::uint64_t seed)>;

struct FoldReport {
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  Metrics metrics;
};

struct EvalReport {
  Protocol protocol = Protocol::kfold;
  Metrics metrics;      // holdout: the split's metrics; kfold: mean over folds
  Metrics stddev;       // kfold only: population stddev over folds
  Confusion confusion;  // summed over folds
  std::vector<FoldReport> folds;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
};

/// Runs the protocol. Fold i trains with seed derive_seed(seed, i); folds may run in
/// parallel and results do not depend on the thread count.
EvalReport evaluate(const FitFn& fit, const Dataset& dataset, const EvalProtocol& protocol,
                    std::uint64_t seed, std::size_t threads = 1);

nlohmann::ordered_json to_json(const Metrics& metrics);
nlohmann::ordered_json to_json(const Confusion& confusion);
nlohmann::ordered_json to_json(const EvalReport& report);

}  // namespace gchk
