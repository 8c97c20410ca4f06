// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace gchk {

/// Row-major dense matrix of training features.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return std::span(data).subspan(r * cols, cols); }
};

enum class Family { lr, mlp, rf, gbt };
enum class Optimizer { adam, sgd };

std::string_view to_string(Family family) noexcept;
std::string_view to_string(Optimizer optimizer) noexcept;
/// Accepts lr, mlp, rf, gbt (and xgb as an alias for gbt). Throws UsageError.
Family parse_family(std::string_view text);
Optimizer parse_optimizer(std::string_view text);

/// L2-regularized logistic regression fitted by Newton's method.
struct LogisticParams {
  double l2 = 1e-4;
  std::size_t max_iterations = 200;
  double tolerance = 1e-6;  // stop once the gradient 2-norm falls below this

  friend bool operator==(const LogisticParams&, const LogisticParams&) = default;
};

/// One hidden ReLU layer, logistic output, mini-batch training with early stopping.
struct MlpParams {
  std::size_t hidden = 128;
  double learning_rate = 0.001;
  Optimizer optimizer = Optimizer::adam;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 300;
  std::size_t patience = 10;
  double min_delta = 1e-4;
  double validation_fraction = 0.1;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Bootstrap trees with Gini splits and sqrt(p) candidate features per node.
struct ForestParams {
  std::size_t n_trees = 400;
  std::optional<std::size_t> max_depth = 10;  // nullopt grows until leaves are pure
  std::size_t min_samples_leaf = 1;

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

/// Gradient-boosted regression trees on the logistic loss (second-order leaf values).
struct BoostParams {
  std::size_t n_estimators = 500;
  std::size_t max_depth = 6;
  double learning_rate = 0.05;
  double lambda = 1.0;
  double min_child_weight = 1.0;

  friend bool operator==(const BoostParams&, const BoostParams&) = default;
};

using Hyperparams = std::variant<LogisticParams, MlpParams, ForestParams, BoostParams>;

Family family_of(const Hyperparams& params) noexcept;
Hyperparams default_params(Family family);

/// Per-feature z-scoring fitted on training rows. Zero-variance columns are dropped.
struct Standardizer {
  std::vector<std::size_t> kept;     // source column of each output feature
  std::vector<std::string> dropped;  // names of zero-variance columns
  std::vector<double> mean;
  std::vector<double> scale;

  std::vector<double> transform(std::span<const double> row) const;
  Matrix transform(const Matrix& rows) const;
};

struct Tree {
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // go left when x[feature] <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;

    friend bool operator==(const Node&, const Node&) = default;
  };

  std::vector<Node> nodes;

  double predict(std::span<const double> row) const;
  std::size_t depth() const;

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;

  friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

struct MlpModel {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;  // hidden x inputs
  std::vector<double> b1;
  std::vector<double> w2;  // hidden
  double b2 = 0.0;
  std::size_t epochs = 0;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

struct ForestModel {
  std::vector<Tree> trees;

  friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

struct BoostModel {
  double base_margin = 0.0;
  double learning_rate = 0.1;
  std::vector<Tree> trees;

  friend bool operator==(const BoostModel&, const BoostModel&) = default;
};

using ModelPayload = std::variant<LogisticModel, MlpModel, ForestModel, BoostModel>;

namespace detail {

/// Per feature, row indices ordered by (value, row index).
std::vector<std::vector<std::uint32_t>> sort_columns(const Matrix& x);

/// Classification tree for one bootstrap sample: `weights` are multiplicities
/// (0 = out of bag), `candidates` features are sampled per node.
Tree grow_gini_tree(const Matrix& x, std::span<const int> y, std::span<const double> weights,
                    const std::vector<std::vector<std::uint32_t>>& sorted,
                    std::optional<std::size_t> max_depth, std::size_t candidates,
                    std::size_t min_samples_leaf, std::uint64_t seed);

/// Regression tree on logistic-loss gradients/hessians; leaves hold -G / (H + lambda).
Tree grow_boost_tree(const Matrix& x, std::span<const double> gradient, std::span<const double> hessian,
                     const std::vector<std::vector<std::uint32_t>>& sorted, std::size_t max_depth,
                     double lambda, double min_child_weight);

}  // namespace detail

}  // namespace gchk
