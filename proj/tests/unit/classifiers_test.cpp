// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gchk/classifiers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gchk/synth.hpp"
#include "helpers.hpp"

namespace gchk {
namespace {

Dataset from_rows(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels) {
  Dataset d;
  for (std::size_t c = 0; c < rows.front().size(); ++c) d.feature_names.push_back("f" + std::to_string(c));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.rows.push_back({"r" + std::to_string(i), rows[i], labels[i] ? Label::hallucinated : Label::grounded});
  }
  return d;
}

double accuracy(const TrainedDetector& det, const Dataset& d) {
  const auto p = predict_proba(det, d);
  const auto y = d.targets();
  std::size_t right = 0;
  for (std::size_t i = 0; i < y.size(); ++i) right += (p[i] >= 0.5) == (y[i] == 1);
  return static_cast<double>(right) / static_cast<double>(y.size());
}

const Dataset& synthetic_features() {
  static const Dataset d = [] {
    SynthConfig c;
    c.n_tokens = 240;
    c.seed = 99;
    const auto s = generate(c, 4);
    return build_features(s.bundle.traces, &s.labels, {}, 4);
  }();
  return d;
}

Hyperparams quick(Family f) {
  switch (f) {
    case Family::rf: {
      ForestParams p;
      p.n_trees = 60;
      return p;
    }
    case Family::gbt: {
      BoostParams p;
      p.n_estimators = 60;
      p.max_depth = 3;
      p.learning_rate = 0.1;
      return p;
    }
    default:
      return default_params(f);
  }
}

TEST(Train, TwoSeparablePoints) {
  const Dataset d = from_rows({{-1.0, 0.3}, {2.0, 0.1}}, {0, 1});
  const auto det = train(d, LogisticParams{}, 1);
  EXPECT_EQ(accuracy(det, d), 1.0);
  const auto& lr = std::get<LogisticModel>(det.model);
  EXPECT_LT(lr.gradient_norm, 1e-6);
}

TEST(Train, XorNeedsHiddenUnits) {
  const Dataset d = from_rows({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {0, 1, 1, 0});
  EXPECT_LE(accuracy(train(d, LogisticParams{}, 1), d), 0.75);
  MlpParams p;
  p.hidden = 8;
  p.learning_rate = 0.05;
  p.max_epochs = 2000;
  p.patience = 200;
  EXPECT_EQ(accuracy(train(d, p, 1), d), 1.0);
}

TEST(Train, EveryFamilySeparatesSyntheticFeatures) {
  const Dataset& d = synthetic_features();
  const Split split = stratified_holdout(d.targets(), 0.25, 5);
  const Dataset tr = d.subset(split.train), te = d.subset(split.test);
  for (Family f : {Family::lr, Family::mlp, Family::rf, Family::gbt}) {
    const auto det = train(tr, default_params(f), 3);
    EXPECT_GE(auc(te.targets(), predict_proba(det, te)), 0.95) << to_string(f);
  }
}

TEST(Train, SeparableTrainingRowsLandOnTheRightSide) {
  Rng rng(4);
  const Dataset d = testing_support::gaussian_dataset(rng, 40, 3, 3.0);
  for (Family f : {Family::lr, Family::mlp, Family::rf, Family::gbt}) {
    EXPECT_EQ(accuracy(train(d, quick(f), 2), d), 1.0) << to_string(f);
  }
}

TEST(Train, DeterministicUnderSeed) {
  Rng rng(6);
  const Dataset d = testing_support::gaussian_dataset(rng, 50, 4, 0.7);
  for (Family f : {Family::lr, Family::mlp, Family::rf, Family::gbt}) {
    const auto a = serialize_model(train(d, quick(f), 9));
    const auto b = serialize_model(train(d, quick(f), 9, 4));
    EXPECT_EQ(a, b) << to_string(f);
  }
  EXPECT_NE(serialize_model(train(d, quick(Family::rf), 9)), serialize_model(train(d, quick(Family::rf), 10)));
  EXPECT_NE(serialize_model(train(d, quick(Family::mlp), 9)), serialize_model(train(d, quick(Family::mlp), 10)));
}

TEST(Train, RejectsDegenerateData) {
  const Dataset one = from_rows({{1.0}, {2.0}, {3.0}}, {1, 1, 1});
  EXPECT_THROW(train(one, LogisticParams{}, 1), DegenerateError);
  Dataset nan = from_rows({{1.0}, {NAN}, {3.0}}, {0, 1, 1});
  EXPECT_THROW(train(nan, BoostParams{}, 1), DegenerateError);
  const Dataset flat = from_rows({{1.0}, {1.0}, {1.0}}, {0, 1, 1});
  EXPECT_THROW(train(flat, BoostParams{}, 1), DegenerateError);
}

TEST(Standardizer, TrainingRowsAreStandardized) {
  Rng rng(8);
  Dataset d = testing_support::gaussian_dataset(rng, 60, 3, 1.0);
  for (auto& row : d.rows) {
    row.values[1] = 1e4 + 50.0 * row.values[1];
    row.values.push_back(7.5);  // constant column
  }
  d.feature_names.push_back("flat");
  const auto det = train(d, LogisticParams{}, 1);
  EXPECT_EQ(det.standardizer.dropped, std::vector<std::string>{"flat"});
  EXPECT_EQ(det.standardizer.kept, (std::vector<std::size_t>{0, 1, 2}));
  for (std::size_t j = 0; j < 3; ++j) {
    double sum = 0.0, sq = 0.0;
    for (const auto& row : d.rows) sum += det.standardizer.transform(row.values)[j];
    const double mean = sum / static_cast<double>(d.size());
    for (const auto& row : d.rows) {
      const double z = det.standardizer.transform(row.values)[j] - mean;
      sq += z * z;
    }
    EXPECT_LT(std::abs(mean), 1e-9);
    EXPECT_NEAR(std::sqrt(sq / static_cast<double>(d.size())), 1.0, 1e-9);
  }
}

TEST(Predict, ProbabilitiesAreFiniteForExtremeInputs) {
  Rng rng(10);
  const Dataset d = testing_support::gaussian_dataset(rng, 40, 2, 1.0);
  const Dataset extreme = from_rows({{1e300, -1e300}, {-1e300, 1e300}, {0, 0}, {1e-300, 5}}, {0, 1, 0, 1});
  Dataset renamed = extreme;
  renamed.feature_names = d.feature_names;
  for (Family f : {Family::lr, Family::mlp, Family::rf, Family::gbt}) {
    const auto det = train(d, quick(f), 1);
    for (double p : predict_proba(det, renamed)) {
      EXPECT_FALSE(std::isnan(p)) << to_string(f);
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
}

TEST(Predict, RepeatedRowsGiveIdenticalProbabilities) {
  Rng rng(12);
  const Dataset d = testing_support::gaussian_dataset(rng, 40, 3, 1.0);
  const Dataset same = from_rows(std::vector<std::vector<double>>(25, {0.3, -0.2, 0.9}), std::vector<int>(25, 0));
  Dataset renamed = same;
  renamed.feature_names = d.feature_names;
  for (Family f : {Family::lr, Family::mlp, Family::rf, Family::gbt}) {
    const auto p = predict_proba(train(d, quick(f), 1), renamed);
    EXPECT_EQ(std::set<double>(p.begin(), p.end()).size(), 1u) << to_string(f);
  }
}

TEST(Predict, LayoutMismatchNamesColumns) {
  Rng rng(13);
  const Dataset d = testing_support::gaussian_dataset(rng, 20, 3, 1.0);
  const auto det = train(d, LogisticParams{}, 1);
  Dataset other = d;
  other.feature_names = {"f0", "f2", "extra"};
  try {
    predict_proba(det, other);
    FAIL();
  } catch (const ConsistencyError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("missing columns: f1"), std::string::npos) << what;
    EXPECT_NE(what.find("extra columns: extra"), std::string::npos) << what;
  }
  other.feature_names = {"f2", "f1", "f0"};
  EXPECT_THROW(predict_proba(det, other), ConsistencyError);
}

TEST(Forest, SingleStumpMatchesHandTrace) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 20; ++i) {
    rows.push_back({static_cast<double>(i)});
    labels.push_back(i >= 10 ? 1 : 0);
  }
  const Dataset d = from_rows(rows, labels);
  ForestParams p;
  p.n_trees = 1;
  p.max_depth = 1;
  const auto det = train(d, p, 17);
  const Tree& tree = std::get<ForestModel>(det.model).trees.at(0);
  ASSERT_EQ(tree.nodes.size(), 3u);
  EXPECT_EQ(tree.depth(), 1u);
  const auto& root = tree.nodes[0];
  ASSERT_EQ(root.feature, 0);
  const std::set<double> leaves{tree.nodes[1].value, tree.nodes[2].value};
  for (const auto& row : d.rows) {
    const double z = det.standardizer.transform(row.values)[0];
    const double traced = z <= root.threshold ? tree.nodes[root.left].value : tree.nodes[root.right].value;
    const double got = predict_proba(det, row.values);
    EXPECT_EQ(got, traced);
    EXPECT_TRUE(leaves.contains(got));
  }
  EXPECT_LT(tree.nodes[root.left].value, tree.nodes[root.right].value);
}

TEST(Forest, PredictionIsMeanOfTrees) {
  Rng rng(14);
  const Dataset d = testing_support::gaussian_dataset(rng, 50, 4, 0.5);
  const auto det = train(d, quick(Family::rf), 3);
  for (std::size_t r = 0; r < 20; ++r) {
    const auto per_tree = tree_probabilities(det, d.rows[r].values);
    ASSERT_EQ(per_tree.size(), 60u);
    double sum = 0.0;
    for (double p : per_tree) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
      sum += p;
    }
    EXPECT_DOUBLE_EQ(predict_proba(det, d.rows[r].values), sum / 60.0);
  }
}

TEST(Forest, DepthLimitHolds) {
  Rng rng(15);
  const Dataset d = testing_support::gaussian_dataset(rng, 80, 5, 0.2);
  ForestParams p;
  p.n_trees = 10;
  p.max_depth = 3;
  const auto capped = train(d, p, 1);
  for (const auto& t : std::get<ForestModel>(capped.model).trees) EXPECT_LE(t.depth(), 3u);
  p.max_depth = std::nullopt;
  const auto full = train(d, p, 1);
  std::size_t deepest = 0;
  for (const auto& t : std::get<ForestModel>(full.model).trees) deepest = std::max(deepest, t.depth());
  EXPECT_GT(deepest, 3u);
}

TEST(Boost, StagedPredictionsArePrefixes) {
  Rng rng(16);
  const Dataset d = testing_support::gaussian_dataset(rng, 60, 3, 0.6);
  BoostParams full;
  full.n_estimators = 40;
  full.max_depth = 3;
  const auto det = train(d, full, 1);
  EXPECT_EQ(staged_proba(det, d, 40), predict_proba(det, d));
  for (std::size_t e : {1u, 7u, 25u}) {
    BoostParams shorter = full;
    shorter.n_estimators = e;
    EXPECT_EQ(staged_proba(det, d, e), predict_proba(train(d, shorter, 1), d)) << e;
  }
  const double prior = std::log(0.5 / 0.5);
  const auto zero = staged_proba(det, d, 0);
  for (double p : zero) EXPECT_DOUBLE_EQ(p, 1.0 / (1.0 + std::exp(-prior)));
  EXPECT_THROW(staged_proba(train(d, LogisticParams{}, 1), d, 3), UsageError);
}

TEST(Boost, BaseMarginIsLogOdds) {
  Rng rng(17);
  Dataset d = testing_support::gaussian_dataset(rng, 30, 2, 1.0);
  d.rows.erase(d.rows.begin() + 1, d.rows.begin() + 21);  // drop ten positives
  const auto det = train(d, quick(Family::gbt), 1);
  const auto counts = d.class_counts();
  EXPECT_DOUBLE_EQ(std::get<BoostModel>(det.model).base_margin,
                   std::log(static_cast<double>(counts[1]) / static_cast<double>(counts[0])));
}

TEST(Params, JsonRoundTripAndStrictKeys) {
  for (Family f : {Family::lr, Family::mlp, Family::rf, Family::gbt}) {
    const Hyperparams p = default_params(f);
    EXPECT_EQ(params_from_json(f, params_to_json(p)), p);
  }
  ForestParams unlimited;
  unlimited.max_depth = std::nullopt;
  EXPECT_EQ(params_from_json(Family::rf, params_to_json(unlimited)), Hyperparams(unlimited));
  EXPECT_THROW(params_from_json(Family::gbt, {{"depth", 3}}), UsageError);
  EXPECT_THROW(params_from_json(Family::gbt, {{"max_depth", "3"}}), UsageError);
  EXPECT_THROW(params_from_json(Family::mlp, {{"hidden", 0}}), UsageError);
  EXPECT_THROW(params_from_json(Family::mlp, {{"family", "rf"}}), UsageError);
  EXPECT_EQ(parse_family("xgb"), Family::gbt);
  EXPECT_THROW(parse_family("svm"), UsageError);
}

TEST(HyperGridTest, DefaultSizesAndOrder) {
  const HyperGrid grid;
  EXPECT_EQ(grid.enumerate(Family::gbt).size(), 18u);
  EXPECT_EQ(grid.enumerate(Family::rf).size(), 9u);
  EXPECT_EQ(grid.enumerate(Family::mlp).size(), 12u);
  const auto gbt = grid.enumerate(Family::gbt);
  const auto& first = std::get<BoostParams>(gbt[0]);
  EXPECT_EQ(first.max_depth, 4u);
  EXPECT_EQ(first.learning_rate, 0.1);
  EXPECT_EQ(first.n_estimators, 100u);
  EXPECT_EQ(std::get<BoostParams>(gbt[1]).n_estimators, 200u);
  EXPECT_FALSE(std::get<ForestParams>(grid.enumerate(Family::rf)[0]).max_depth.has_value());
  HyperGrid empty;
  empty.mlp_hidden.clear();
  EXPECT_THROW(empty.enumerate(Family::mlp), UsageError);
}

TEST(GridSearch, SinglePointReportsItsScores) {
  Rng rng(20);
  const Dataset d = testing_support::gaussian_dataset(rng, 30, 3, 0.8);
  const std::vector<Hyperparams> points{LogisticParams{}};
  const auto result = grid_search(d, points, 3, 5);
  EXPECT_EQ(result.best_index, 0u);
  EXPECT_EQ(result.best, points[0]);
  ASSERT_EQ(result.points[0].fold_f1.size(), 3u);
  const auto report = evaluate(fit_with(points[0]), d, {Protocol::kfold, 3, 0.1, 0.5}, 5);
  for (std::size_t f = 0; f < 3; ++f) {
    EXPECT_EQ(result.points[0].fold_f1[f], report.folds[f].metrics.f1);
    EXPECT_EQ(result.points[0].fold_auc[f], report.folds[f].metrics.auc);
  }
  EXPECT_DOUBLE_EQ(result.points[0].mean_f1, report.metrics.f1);
}

TEST(GridSearch, DuplicatesDoNotChangeSelection) {
  Rng rng(21);
  const Dataset d = testing_support::gaussian_dataset(rng, 40, 3, 0.5);
  std::vector<Hyperparams> points;
  for (double l2 : {1e-4, 1.0, 30.0}) points.push_back(LogisticParams{l2, 200, 1e-6});
  std::vector<Hyperparams> doubled;
  for (const auto& p : points) {
    doubled.push_back(p);
    doubled.push_back(p);
  }
  const auto a = grid_search(d, points, 4, 8);
  const auto b = grid_search(d, doubled, 4, 8, 3);
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(b.best_index, 2 * a.best_index);
  for (std::size_t i = 0; i < points.size(); ++i) {
    EXPECT_EQ(b.points[2 * i].mean_f1, b.points[2 * i + 1].mean_f1);
  }
}

TEST(GridSearch, RequiresFeasibleFolds) {
  const Dataset d = from_rows({{1}, {2}, {3}, {4}, {5}}, {0, 0, 0, 1, 1});
  const std::vector<Hyperparams> points{LogisticParams{}};
  EXPECT_THROW(grid_search(d, points, 3, 1), DegenerateError);
  EXPECT_THROW(grid_search(d, points, 1, 1), UsageError);
}

/// 4x4 checkerboard on the unit square. Under a fixed short epoch budget a wider
/// hidden layer fits more of the cell boundaries.
Dataset checkerboard(std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (std::size_t i = 0; i < rows; ++i) {
    const double u = rng.uniform(), v = rng.uniform();
    x.push_back({u, v});
    y.push_back((static_cast<int>(u * 4.0) + static_cast<int>(v * 4.0)) % 2);
  }
  return from_rows(x, y);
}

TEST(GridSearch, WiderNetworkWinsOnCheckerboard) {
  const Dataset d = checkerboard(2000, 5);
  std::vector<Hyperparams> points;
  for (std::size_t hidden : {64, 128, 256}) {
    MlpParams p;
    p.hidden = hidden;
    p.max_epochs = 50;
    p.patience = 50;
    points.push_back(p);
  }
  const auto result = grid_search(d, points, 3, 5, 8);
  EXPECT_EQ(std::get<MlpParams>(result.best).hidden, 256u);
  EXPECT_LT(result.points[0].mean_f1, result.points[2].mean_f1);
}

}  // namespace
}  // namespace gchk
