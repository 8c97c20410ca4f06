// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gchk/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gchk/error.hpp"
#include "gchk/parallel.hpp"
#include "gchk/random.hpp"

namespace gchk {

Confusion confusion(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size()) throw InvariantError("labels and predictions differ in length");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      predictions[i] ? ++c.tp : ++c.fn;
    } else {
      predictions[i] ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

double auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw InvariantError("labels and scores differ in length");
  const auto positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int v) { return v != 0; }));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw DegenerateError("AUC needs both classes (positives=" + std::to_string(positives) +
                          ", negatives=" + std::to_string(negatives) + ")");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw DegenerateError("AUC scores contain NaN");
  }
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) positive_rank_sum += mid_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

Metrics compute_metrics(std::span<const int> labels, std::span<const double> scores, double threshold) {
  if (labels.size() != scores.size()) throw InvariantError("labels and scores differ in length");
  std::vector<int> predictions(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) predictions[i] = scores[i] >= threshold ? 1 : 0;
  Metrics m;
  m.confusion = confusion(labels, predictions);
  const auto& c = m.confusion;
  m.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  m.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  m.auc = auc(labels, scores);
  return m;
}

namespace {

std::array<std::vector<std::size_t>, 2> class_members(std::span<const int> labels) {
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i] ? 1 : 0].push_back(i);
  return members;
}

}  // namespace

std::vector<std::size_t> stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > labels.size()) {
    throw UsageError("k-fold needs 2 <= k <= rows (k=" + std::to_string(k) + ", rows=" + std::to_string(labels.size()) + ")");
  }
  auto members = class_members(labels);
  std::vector<std::size_t> fold(labels.size());
  std::size_t next = 0;
  for (std::size_t cls = 0; cls < 2; ++cls) {
    Rng rng(derive_seed(seed, cls));
    rng.shuffle(std::span(members[cls]));
    for (std::size_t idx : members[cls]) fold[idx] = next++ % k;
  }
  return fold;
}

Split stratified_holdout(std::span<const int> labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw UsageError("test fraction must be in (0, 1)");
  auto members = class_members(labels);
  Split split;
  for (std::size_t cls = 0; cls < 2; ++cls) {
    const std::size_t count = members[cls].size();
    if (count < 2) {
      throw DegenerateError("holdout needs at least 2 rows per class (" + std::string(cls ? "hallucinated" : "grounded") +
                            "=" + std::to_string(count) + ")");
    }
    const auto wanted = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(count)));
    const std::size_t n_test = std::clamp<std::size_t>(wanted, 1, count - 1);
    Rng rng(derive_seed(seed, cls));
    rng.shuffle(std::span(members[cls]));
    split.test.insert(split.test.end(), members[cls].begin(), members[cls].begin() + n_test);
    split.train.insert(split.train.end(), members[cls].begin() + n_test, members[cls].end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<Split> kfold_splits(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  const auto fold = stratified_kfold(labels, k, seed);
  std::vector<Split> splits(k);
  for (std::size_t i = 0; i < fold.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) (f == fold[i] ? splits[f].test : splits[f].train).push_back(i);
  }
  return splits;
}

std::string_view to_string(Protocol protocol) noexcept {
  return protocol == Protocol::holdout ? "holdout" : "kfold";
}

Protocol parse_protocol(std::string_view text) {
  if (text == "holdout") return Protocol::holdout;
  if (text == "kfold") return Protocol::kfold;
  throw UsageError("unknown protocol '" + std::string(text) + "' (expected holdout or kfold)");
}

EvalReport evaluate(const FitFn& fit, const Dataset& dataset, const EvalProtocol& protocol, std::uint64_t seed,
                    std::size_t threads) {
  const std::vector<int> labels = dataset.targets();
  const auto counts = dataset.class_counts();
  std::vector<Split> splits;
  if (protocol.kind == Protocol::holdout) {
    splits.push_back(stratified_holdout(labels, protocol.test_fraction, seed));
  } else {
    if (counts[0] < protocol.folds || counts[1] < protocol.folds) {
      throw DegenerateError("cannot stratify " + std::to_string(protocol.folds) + " folds: grounded=" +
                            std::to_string(counts[0]) + ", hallucinated=" + std::to_string(counts[1]));
    }
    splits = kfold_splits(labels, protocol.folds, seed);
  }

  EvalReport report;
  report.protocol = protocol.kind;
  report.seed = seed;
  report.config = {{"protocol", std::string(to_string(protocol.kind))},
                   {"folds", protocol.kind == Protocol::kfold ? protocol.folds : 1},
                   {"test_fraction", protocol.test_fraction},
                   {"threshold", protocol.threshold}};
  report.folds.resize(splits.size());
  parallel_for(splits.size(), threads, [&](std::size_t f) {
    const Dataset train_set = dataset.subset(splits[f].train);
    const Dataset test_set = dataset.subset(splits[f].test);
    const ScoreFn score = fit(train_set, derive_seed(seed, f));
    const std::vector<double> scores = score(test_set);
    report.folds[f] = {f, train_set.size(), test_set.size(),
                       compute_metrics(test_set.targets(), scores, protocol.threshold)};
  });

  const double n = static_cast<double>(report.folds.size());
  auto mean_of = [&](double Metrics::*field) {
    double sum = 0.0;
    for (const auto& f : report.folds) sum += f.metrics.*field;
    return sum / n;
  };
  auto stddev_of = [&](double Metrics::*field, double mean) {
    double sq = 0.0;
    for (const auto& f : report.folds) sq += (f.metrics.*field - mean) * (f.metrics.*field - mean);
    return std::sqrt(sq / n);
  };
  for (auto field : {&Metrics::precision, &Metrics::recall, &Metrics::f1, &Metrics::auc}) {
    report.metrics.*field = mean_of(field);
    report.stddev.*field = stddev_of(field, report.metrics.*field);
  }
  for (const auto& f : report.folds) report.confusion += f.metrics.confusion;
  report.metrics.confusion = report.confusion;
  return report;
}

nlohmann::ordered_json to_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

nlohmann::ordered_json to_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"auc", m.auc},
          {"confusion", to_json(m.confusion)}};
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json out;
  out["protocol"] = std::string(to_string(report.protocol));
  out["seed"] = report.seed;
  out["config"] = report.config;
  nlohmann::ordered_json metrics = {{"precision", report.metrics.precision},
                                    {"recall", report.metrics.recall},
                                    {"f1", report.metrics.f1},
                                    {"auc", report.metrics.auc}};
  out["metrics"] = std::move(metrics);
  if (report.protocol == Protocol::kfold) {
    out["stddev"] = {{"precision", report.stddev.precision},
                     {"recall", report.stddev.recall},
                     {"f1", report.stddev.f1},
                     {"auc", report.stddev.auc}};
  }
  out["confusion"] = to_json(report.confusion);
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const auto& f : report.folds) {
    folds.push_back({{"fold", f.fold}, {"train_size", f.train_size}, {"test_size", f.test_size},
                     {"metrics", to_json(f.metrics)}});
  }
  out["folds"] = std::move(folds);
  return out;
}

}  // namespace gchk
