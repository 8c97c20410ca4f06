// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gchk/classifiers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>

#include "gchk/parallel.hpp"
#include "gchk/random.hpp"

namespace gchk {

std::string_view to_string(Family family) noexcept {
  switch (family) {
    case Family::lr: return "lr";
    case Family::mlp: return "mlp";
    case Family::rf: return "rf";
    case Family::gbt: return "gbt";
  }
  return "lr";
}

std::string_view to_string(Optimizer optimizer) noexcept {
  return optimizer == Optimizer::adam ? "adam" : "sgd";
}

Family parse_family(std::string_view text) {
  if (text == "lr") return Family::lr;
  if (text == "mlp") return Family::mlp;
  if (text == "rf") return Family::rf;
  if (text == "gbt" || text == "xgb") return Family::gbt;
  throw UsageError("unknown classifier family '" + std::string(text) + "' (expected lr, mlp, rf or gbt)");
}

Optimizer parse_optimizer(std::string_view text) {
  if (text == "adam") return Optimizer::adam;
  if (text == "sgd") return Optimizer::sgd;
  throw UsageError("unknown optimizer '" + std::string(text) + "' (expected adam or sgd)");
}

Family family_of(const Hyperparams& params) noexcept { return static_cast<Family>(params.index()); }

Hyperparams default_params(Family family) {
  switch (family) {
    case Family::lr: return LogisticParams{};
    case Family::mlp: return MlpParams{};
    case Family::rf: return ForestParams{};
    case Family::gbt: return BoostParams{};
  }
  return LogisticParams{};
}

std::vector<double> Standardizer::transform(std::span<const double> row) const {
  std::vector<double> out(kept.size());
  for (std::size_t j = 0; j < kept.size(); ++j) out[j] = (row[kept[j]] - mean[j]) / scale[j];
  return out;
}

Matrix Standardizer::transform(const Matrix& rows) const {
  Matrix out(rows.rows, kept.size());
  for (std::size_t r = 0; r < rows.rows; ++r) {
    for (std::size_t j = 0; j < kept.size(); ++j) out(r, j) = (rows(r, kept[j]) - mean[j]) / scale[j];
  }
  return out;
}

namespace {

double sigmoid(double margin) {
  if (margin >= 0.0) return 1.0 / (1.0 + std::exp(-margin));
  const double e = std::exp(margin);
  return e / (1.0 + e);
}

Matrix to_matrix(const Dataset& dataset) {
  Matrix x(dataset.size(), dataset.width());
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    std::copy(dataset.rows[r].values.begin(), dataset.rows[r].values.end(), x.data.begin() + r * x.cols);
  }
  return x;
}

Standardizer fit_standardizer(const Dataset& dataset) {
  Standardizer s;
  const double n = static_cast<double>(dataset.size());
  for (std::size_t c = 0; c < dataset.width(); ++c) {
    double sum = 0.0;
    for (const auto& row : dataset.rows) sum += row.values[c];
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& row : dataset.rows) sq += (row.values[c] - mean) * (row.values[c] - mean);
    const double sd = std::sqrt(sq / n);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      s.dropped.push_back(dataset.feature_names[c]);
      continue;
    }
    s.kept.push_back(c);
    s.mean.push_back(mean);
    s.scale.push_back(sd);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Logistic regression

LogisticModel fit_logistic(const Matrix& x, std::span<const int> y, const LogisticParams& params) {
  const auto n = static_cast<Eigen::Index>(x.rows);
  const auto p = static_cast<Eigen::Index>(x.cols);
  // design matrix with a trailing intercept column
  Eigen::MatrixXd design(n, p + 1);
  Eigen::VectorXd target(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < p; ++c) design(r, c) = x(r, c);
    design(r, p) = 1.0;
    target(r) = y[r];
  }
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p + 1, params.l2);
  penalty(p) = 0.0;

  auto objective = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd margin = design * theta;
    double loss = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double m = margin(r);
      // log(1 + e^m) - y m, computed without overflow
      loss += (m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m))) - target(r) * m;
    }
    return loss / static_cast<double>(n) + 0.5 * theta.cwiseProduct(penalty).dot(theta);
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
  LogisticModel model;
  for (std::size_t it = 0; it < params.max_iterations; ++it) {
    const Eigen::VectorXd margin = design * theta;
    Eigen::VectorXd prob(n), curvature(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      prob(r) = sigmoid(margin(r));
      curvature(r) = std::max(prob(r) * (1.0 - prob(r)), 1e-12);
    }
    const Eigen::VectorXd gradient =
        design.transpose() * (prob - target) / static_cast<double>(n) + theta.cwiseProduct(penalty);
    model.gradient_norm = gradient.norm();
    model.iterations = it;
    if (model.gradient_norm < params.tolerance) break;

    Eigen::MatrixXd hessian = design.transpose() * curvature.asDiagonal() * design / static_cast<double>(n);
    hessian.diagonal() += penalty;
    hessian.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hessian.ldlt().solve(gradient);

    const double current = objective(theta);
    double t = 1.0;
    Eigen::VectorXd candidate = theta - step;
    while (objective(candidate) > current - 1e-4 * t * gradient.dot(step) && t > 1e-10) {
      t *= 0.5;
      candidate = theta - t * step;
    }
    theta = candidate;
    model.iterations = it + 1;
  }
  model.weights.assign(theta.data(), theta.data() + p);
  model.bias = theta(p);
  return model;
}

double logistic_margin(const LogisticModel& model, std::span<const double> z) {
  double m = model.bias;
  for (std::size_t j = 0; j < z.size(); ++j) m += model.weights[j] * z[j];
  return m;
}

// ---------------------------------------------------------------------------
// Multi-layer perceptron

// Flat parameter layout: [w1 (hidden x inputs) | b1 (hidden) | w2 (hidden) | b2]
struct MlpShape {
  std::size_t inputs;
  std::size_t hidden;

  std::size_t w1() const { return 0; }
  std::size_t b1() const { return hidden * inputs; }
  std::size_t w2() const { return b1() + hidden; }
  std::size_t b2() const { return w2() + hidden; }
  std::size_t size() const { return b2() + 1; }
};

double mlp_forward(const MlpShape& shape, std::span<const double> theta, std::span<const double> x,
                   std::span<double> hidden_out) {
  double out = theta[shape.b2()];
  for (std::size_t h = 0; h < shape.hidden; ++h) {
    double z = theta[shape.b1() + h];
    const double* w = theta.data() + shape.w1() + h * shape.inputs;
    for (std::size_t i = 0; i < shape.inputs; ++i) z += w[i] * x[i];
    const double a = z > 0.0 ? z : 0.0;
    hidden_out[h] = a;
    out += theta[shape.w2() + h] * a;
  }
  return out;
}

double bce(double p, int y) {
  constexpr double eps = 1e-12;
  return y ? -std::log(std::max(p, eps)) : -std::log(std::max(1.0 - p, eps));
}

MlpModel fit_mlp(const Matrix& x, std::span<const int> y, const MlpParams& params, std::uint64_t seed) {
  const MlpShape shape{x.cols, params.hidden};
  Rng rng(seed);
  std::vector<double> theta(shape.size(), 0.0);
  const double w1_scale = std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(1, shape.inputs)));
  const double w2_scale = std::sqrt(1.0 / static_cast<double>(shape.hidden));
  for (std::size_t i = 0; i < shape.b1(); ++i) theta[shape.w1() + i] = rng.normal() * w1_scale;
  for (std::size_t h = 0; h < shape.hidden; ++h) theta[shape.w2() + h] = rng.normal() * w2_scale;

  // Early stopping monitors a stratified validation split when the data allows one,
  // otherwise the training loss.
  std::vector<std::size_t> train_rows(x.rows);
  std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
  std::vector<std::size_t> valid_rows;
  {
    std::size_t positives = 0;
    for (int v : y) positives += v;
    const std::size_t negatives = y.size() - positives;
    if (params.validation_fraction > 0.0 && x.rows >= 20 && positives >= 2 && negatives >= 2) {
      Split split = stratified_holdout(y, params.validation_fraction, derive_seed(seed, 1));
      train_rows = std::move(split.train);
      valid_rows = std::move(split.test);
    }
  }
  const std::vector<std::size_t>& monitor_rows = valid_rows.empty() ? train_rows : valid_rows;

  std::vector<double> hidden(shape.hidden);
  auto monitor_loss = [&] {
    double loss = 0.0;
    for (std::size_t r : monitor_rows) loss += bce(sigmoid(mlp_forward(shape, theta, x.row(r), hidden)), y[r]);
    return loss / static_cast<double>(monitor_rows.size());
  };

  std::vector<double> grad(shape.size());
  std::vector<double> m1(shape.size(), 0.0), m2(shape.size(), 0.0);
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::size_t step = 0;

  std::vector<double> best = theta;
  double best_loss = monitor_loss();
  std::size_t since_best = 0;
  std::size_t epochs = 0;
  const std::size_t batch = std::max<std::size_t>(1, params.batch_size);

  for (std::size_t epoch = 0; epoch < params.max_epochs; ++epoch) {
    rng.shuffle(std::span(train_rows));
    for (std::size_t start = 0; start < train_rows.size(); start += batch) {
      const std::size_t end = std::min(train_rows.size(), start + batch);
      const double inv = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t r = train_rows[k];
        const auto xr = x.row(r);
        const double delta = (sigmoid(mlp_forward(shape, theta, xr, hidden)) - y[r]) * inv;
        grad[shape.b2()] += delta;
        for (std::size_t h = 0; h < shape.hidden; ++h) {
          if (hidden[h] <= 0.0) continue;
          grad[shape.w2() + h] += delta * hidden[h];
          const double dz = delta * theta[shape.w2() + h];
          grad[shape.b1() + h] += dz;
          double* gw = grad.data() + shape.w1() + h * shape.inputs;
          for (std::size_t i = 0; i < shape.inputs; ++i) gw[i] += dz * xr[i];
        }
      }
      ++step;
      if (params.optimizer == Optimizer::adam) {
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < theta.size(); ++i) {
          m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad[i];
          m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad[i] * grad[i];
          theta[i] -= params.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + adam_eps);
        }
      } else {
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= params.learning_rate * grad[i];
      }
    }
    epochs = epoch + 1;
    const double loss = monitor_loss();
    if (loss < best_loss - params.min_delta) {
      best_loss = loss;
      best = theta;
      since_best = 0;
    } else if (++since_best >= params.patience) {
      break;
    }
  }

  MlpModel model;
  model.inputs = shape.inputs;
  model.hidden = shape.hidden;
  model.w1.assign(best.begin() + shape.w1(), best.begin() + shape.b1());
  model.b1.assign(best.begin() + shape.b1(), best.begin() + shape.w2());
  model.w2.assign(best.begin() + shape.w2(), best.begin() + shape.b2());
  model.b2 = best[shape.b2()];
  model.epochs = epochs;
  return model;
}

double mlp_margin(const MlpModel& model, std::span<const double> z) {
  double out = model.b2;
  for (std::size_t h = 0; h < model.hidden; ++h) {
    double a = model.b1[h];
    for (std::size_t i = 0; i < model.inputs; ++i) a += model.w1[h * model.inputs + i] * z[i];
    if (a > 0.0) out += model.w2[h] * a;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random forest

ForestModel fit_forest(const Matrix& x, std::span<const int> y, const ForestParams& params,
                       std::uint64_t seed, std::size_t threads) {
  const auto sorted = detail::sort_columns(x);
  const std::size_t candidates =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(x.cols)))));
  ForestModel model;
  model.trees.resize(params.n_trees);
  parallel_for(params.n_trees, threads, [&](std::size_t t) {
    const std::uint64_t tree_seed = derive_seed(seed, t);
    Rng rng(tree_seed);
    std::vector<double> weights(x.rows, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) weights[rng.below(x.rows)] += 1.0;
    model.trees[t] = detail::grow_gini_tree(x, y, weights, sorted, params.max_depth, candidates,
                                            params.min_samples_leaf, derive_seed(tree_seed, 1));
  });
  return model;
}

// ---------------------------------------------------------------------------
// Gradient boosting

BoostModel fit_boost(const Matrix& x, std::span<const int> y, const BoostParams& params) {
  const auto sorted = detail::sort_columns(x);
  const double positives = static_cast<double>(std::accumulate(y.begin(), y.end(), 0));
  const double prior = positives / static_cast<double>(y.size());

  BoostModel model;
  model.base_margin = std::log(prior / (1.0 - prior));
  model.learning_rate = params.learning_rate;
  std::vector<double> margin(x.rows, model.base_margin);
  std::vector<double> gradient(x.rows), hessian(x.rows);
  model.trees.reserve(params.n_estimators);
  for (std::size_t round = 0; round < params.n_estimators; ++round) {
    for (std::size_t r = 0; r < x.rows; ++r) {
      const double p = sigmoid(margin[r]);
      gradient[r] = p - y[r];
      hessian[r] = p * (1.0 - p);
    }
    Tree tree = detail::grow_boost_tree(x, gradient, hessian, sorted, params.max_depth, params.lambda,
                                        params.min_child_weight);
    for (std::size_t r = 0; r < x.rows; ++r) margin[r] += params.learning_rate * tree.predict(x.row(r));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

double boost_margin(const BoostModel& model, std::span<const double> z, std::size_t estimators) {
  double m = model.base_margin;
  const std::size_t count = std::min(estimators, model.trees.size());
  for (std::size_t t = 0; t < count; ++t) m += model.learning_rate * model.trees[t].predict(z);
  return m;
}

void check_params(const Hyperparams& params) {
  std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogisticParams>) {
          if (!(p.l2 >= 0.0)) throw UsageError("lr: l2 must be >= 0");
          if (p.max_iterations == 0) throw UsageError("lr: max_iterations must be >= 1");
        } else if constexpr (std::is_same_v<P, MlpParams>) {
          if (p.hidden == 0) throw UsageError("mlp: hidden must be >= 1");
          if (!(p.learning_rate > 0.0)) throw UsageError("mlp: learning_rate must be > 0");
          if (p.batch_size == 0) throw UsageError("mlp: batch_size must be >= 1");
          if (p.patience == 0) throw UsageError("mlp: patience must be >= 1");
          if (!(p.validation_fraction >= 0.0 && p.validation_fraction < 1.0)) {
            throw UsageError("mlp: validation_fraction must be in [0, 1)");
          }
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          if (p.n_trees == 0) throw UsageError("rf: n_trees must be >= 1");
          if (p.max_depth && *p.max_depth == 0) throw UsageError("rf: max_depth must be >= 1");
          if (p.min_samples_leaf == 0) throw UsageError("rf: min_samples_leaf must be >= 1");
        } else {
          if (p.n_estimators == 0) throw UsageError("gbt: n_estimators must be >= 1");
          if (p.max_depth == 0) throw UsageError("gbt: max_depth must be >= 1");
          if (!(p.learning_rate > 0.0)) throw UsageError("gbt: learning_rate must be > 0");
          if (!(p.lambda >= 0.0)) throw UsageError("gbt: lambda must be >= 0");
        }
      },
      params);
}

void check_layout(const TrainedDetector& detector, const Dataset& dataset) {
  if (dataset.feature_names == detector.feature_names) return;
  std::set<std::string> have(dataset.feature_names.begin(), dataset.feature_names.end());
  std::set<std::string> want(detector.feature_names.begin(), detector.feature_names.end());
  std::string missing, extra;
  for (const auto& name : want) {
    if (!have.contains(name)) missing += (missing.empty() ? "" : ",") + name;
  }
  for (const auto& name : have) {
    if (!want.contains(name)) extra += (extra.empty() ? "" : ",") + name;
  }
  std::string message = "feature layout does not match the detector";
  if (!missing.empty()) message += "; missing columns: " + missing;
  if (!extra.empty()) message += "; extra columns: " + extra;
  if (missing.empty() && extra.empty()) message += "; columns are in a different order";
  throw ConsistencyError(message);
}

}  // namespace

TrainedDetector train(const Dataset& dataset, const Hyperparams& params, std::uint64_t seed, std::size_t threads) {
  check_params(params);
  const auto counts = dataset.class_counts();
  if (counts[0] == 0 || counts[1] == 0) {
    throw DegenerateError("training data must contain both classes (grounded=" + std::to_string(counts[0]) +
                          ", hallucinated=" + std::to_string(counts[1]) + ")");
  }
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const auto& row = dataset.rows[r];
    if (row.values.size() != dataset.width()) throw InvariantError("row " + std::to_string(r) + " has the wrong width");
    for (double v : row.values) {
      if (!std::isfinite(v)) throw DegenerateError("row '" + row.token_id + "' has a non-finite feature");
    }
  }

  TrainedDetector detector;
  detector.params = params;
  detector.feature_names = dataset.feature_names;
  detector.standardizer = fit_standardizer(dataset);
  if (detector.standardizer.kept.empty()) throw DegenerateError("every feature has zero variance");

  const Matrix x = detector.standardizer.transform(to_matrix(dataset));
  const std::vector<int> y = dataset.targets();
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogisticParams>) {
          detector.model = fit_logistic(x, y, p);
        } else if constexpr (std::is_same_v<P, MlpParams>) {
          detector.model = fit_mlp(x, y, p, seed);
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          detector.model = fit_forest(x, y, p, seed, threads);
        } else {
          detector.model = fit_boost(x, y, p);
        }
      },
      params);
  return detector;
}

double predict_proba(const TrainedDetector& detector, std::span<const double> row) {
  const std::vector<double> z = detector.standardizer.transform(row);
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LogisticModel>) {
          return sigmoid(logistic_margin(m, z));
        } else if constexpr (std::is_same_v<M, MlpModel>) {
          return sigmoid(mlp_margin(m, z));
        } else if constexpr (std::is_same_v<M, ForestModel>) {
          double sum = 0.0;
          for (const auto& tree : m.trees) sum += tree.predict(z);
          return sum / static_cast<double>(m.trees.size());
        } else {
          return sigmoid(boost_margin(m, z, m.trees.size()));
        }
      },
      detector.model);
}

std::vector<double> predict_proba(const TrainedDetector& detector, const Dataset& dataset) {
  check_layout(detector, dataset);
  std::vector<double> out;
  out.reserve(dataset.size());
  for (const auto& row : dataset.rows) out.push_back(predict_proba(detector, row.values));
  return out;
}

std::vector<double> staged_proba(const TrainedDetector& detector, const Dataset& dataset, std::size_t estimators) {
  const auto* boost = std::get_if<BoostModel>(&detector.model);
  if (boost == nullptr) throw UsageError("staged predictions need a gbt detector");
  check_layout(detector, dataset);
  std::vector<double> out;
  for (const auto& row : dataset.rows) {
    out.push_back(sigmoid(boost_margin(*boost, detector.standardizer.transform(row.values), estimators)));
  }
  return out;
}

std::vector<double> tree_probabilities(const TrainedDetector& detector, std::span<const double> row) {
  const auto* forest = std::get_if<ForestModel>(&detector.model);
  if (forest == nullptr) throw UsageError("per-tree probabilities need an rf detector");
  const std::vector<double> z = detector.standardizer.transform(row);
  std::vector<double> out;
  for (const auto& tree : forest->trees) out.push_back(tree.predict(z));
  return out;
}

std::vector<Hyperparams> HyperGrid::enumerate(Family family) const {
  std::vector<Hyperparams> points;
  auto require = [&](bool ok, const char* what) {
    if (!ok) throw UsageError(std::string("hyperparameter grid has no values for ") + what);
  };
  switch (family) {
    case Family::lr:
      require(!lr_l2.empty(), "lr.l2");
      for (double l2 : lr_l2) {
        LogisticParams p;
        p.l2 = l2;
        points.emplace_back(p);
      }
      break;
    case Family::gbt:
      require(!gbt_depth.empty() && !gbt_learning_rate.empty() && !gbt_estimators.empty(), "gbt");
      for (auto depth : gbt_depth)
        for (double rate : gbt_learning_rate)
          for (auto estimators : gbt_estimators) {
            BoostParams p;
            p.max_depth = depth;
            p.learning_rate = rate;
            p.n_estimators = estimators;
            points.emplace_back(p);
          }
      break;
    case Family::rf:
      require(!rf_depth.empty() && !rf_trees.empty(), "rf");
      for (auto depth : rf_depth)
        for (auto trees : rf_trees) {
          ForestParams p;
          p.max_depth = depth;
          p.n_trees = trees;
          points.emplace_back(p);
        }
      break;
    case Family::mlp:
      require(!mlp_hidden.empty() && !mlp_learning_rate.empty() && !mlp_optimizer.empty(), "mlp");
      for (auto hidden : mlp_hidden)
        for (double rate : mlp_learning_rate)
          for (auto optimizer : mlp_optimizer) {
            MlpParams p;
            p.hidden = hidden;
            p.learning_rate = rate;
            p.optimizer = optimizer;
            points.emplace_back(p);
          }
      break;
  }
  return points;
}

GridSearchResult grid_search(const Dataset& dataset, std::span<const Hyperparams> points, std::size_t folds,
                             std::uint64_t seed, std::size_t threads) {
  if (points.empty()) throw UsageError("grid search needs at least one point");
  if (folds < 2) throw UsageError("grid search needs at least 2 folds");
  const auto counts = dataset.class_counts();
  if (counts[0] < folds || counts[1] < folds) {
    throw DegenerateError("cannot stratify " + std::to_string(folds) + " folds: grounded=" +
                          std::to_string(counts[0]) + ", hallucinated=" + std::to_string(counts[1]));
  }
  for (const auto& p : points) check_params(p);

  const std::vector<int> labels = dataset.targets();
  const std::vector<Split> splits = kfold_splits(labels, folds, seed);

  GridSearchResult result;
  result.folds = folds;
  result.seed = seed;
  result.points.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    result.points[i].params = points[i];
    result.points[i].fold_f1.assign(folds, 0.0);
    result.points[i].fold_auc.assign(folds, 0.0);
  }

  parallel_for(points.size() * folds, threads, [&](std::size_t job) {
    const std::size_t i = job / folds;
    const std::size_t f = job % folds;
    const Dataset train_set = dataset.subset(splits[f].train);
    const Dataset test_set = dataset.subset(splits[f].test);
    const TrainedDetector detector = train(train_set, points[i], derive_seed(seed, f), 1);
    const Metrics m = compute_metrics(test_set.targets(), predict_proba(detector, test_set), detector.threshold);
    result.points[i].fold_f1[f] = m.f1;
    result.points[i].fold_auc[f] = m.auc;
  });

  for (auto& point : result.points) {
    const double n = static_cast<double>(folds);
    point.mean_f1 = std::accumulate(point.fold_f1.begin(), point.fold_f1.end(), 0.0) / n;
    point.mean_auc = std::accumulate(point.fold_auc.begin(), point.fold_auc.end(), 0.0) / n;
    double sq = 0.0;
    for (double v : point.fold_f1) sq += (v - point.mean_f1) * (v - point.mean_f1);
    point.std_f1 = std::sqrt(sq / n);
  }
  for (std::size_t i = 1; i < result.points.size(); ++i) {
    if (result.points[i].mean_f1 > result.points[result.best_index].mean_f1) result.best_index = i;
  }
  result.best = result.points[result.best_index].params;
  return result;
}

GridSearchResult grid_search(const Dataset& dataset, Family family, const HyperGrid& grid, std::size_t folds,
                             std::uint64_t seed, std::size_t threads) {
  const std::vector<Hyperparams> points = grid.enumerate(family);
  return grid_search(dataset, points, folds, seed, threads);
}

FitFn fit_with(const Hyperparams& params) {
  return [params](const Dataset& train_set, std::uint64_t seed) -> ScoreFn {
    auto detector = std::make_shared<const TrainedDetector>(train(train_set, params, seed, 1));
    return [detector](const Dataset& rows) { return predict_proba(*detector, rows); };
  };
}

FitFn use_detector(TrainedDetector detector) {
  auto shared = std::make_shared<const TrainedDetector>(std::move(detector));
  return [shared](const Dataset&, std::uint64_t) -> ScoreFn {
    return [shared](const Dataset& rows) { return predict_proba(*shared, rows); };
  };
}

// ---------------------------------------------------------------------------
// JSON forms of hyperparameters

nlohmann::ordered_json params_to_json(const Hyperparams& params) {
  nlohmann::ordered_json out;
  out["family"] = std::string(to_string(family_of(params)));
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogisticParams>) {
          out["l2"] = p.l2;
          out["max_iterations"] = p.max_iterations;
          out["tolerance"] = p.tolerance;
        } else if constexpr (std::is_same_v<P, MlpParams>) {
          out["hidden"] = p.hidden;
          out["learning_rate"] = p.learning_rate;
          out["optimizer"] = std::string(to_string(p.optimizer));
          out["batch_size"] = p.batch_size;
          out["max_epochs"] = p.max_epochs;
          out["patience"] = p.patience;
          out["min_delta"] = p.min_delta;
          out["validation_fraction"] = p.validation_fraction;
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          out["n_trees"] = p.n_trees;
          out["max_depth"] = p.max_depth ? nlohmann::ordered_json(*p.max_depth) : nlohmann::ordered_json(nullptr);
          out["min_samples_leaf"] = p.min_samples_leaf;
        } else {
          out["n_estimators"] = p.n_estimators;
          out["max_depth"] = p.max_depth;
          out["learning_rate"] = p.learning_rate;
          out["lambda"] = p.lambda;
          out["min_child_weight"] = p.min_child_weight;
        }
      },
      params);
  return out;
}

namespace {

template <typename T>
T json_value(const nlohmann::json& value, const std::string& key) {
  try {
    if constexpr (std::is_unsigned_v<T>) {
      if (!value.is_number_unsigned()) throw UsageError("");
    }
    return value.get<T>();
  } catch (const std::exception&) {
    throw UsageError("hyperparameter '" + key + "' has the wrong type");
  }
}

}  // namespace

Hyperparams params_from_json(Family family, const nlohmann::json& object) {
  if (!object.is_object()) throw UsageError("hyperparameters must be a JSON object");
  Hyperparams params = default_params(family);
  for (const auto& [key, value] : object.items()) {
    if (key == "family") {
      if (parse_family(json_value<std::string>(value, key)) != family) {
        throw UsageError("hyperparameters are for family '" + value.get<std::string>() + "'");
      }
      continue;
    }
    bool known = true;
    std::visit(
        [&](auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, LogisticParams>) {
            if (key == "l2") p.l2 = json_value<double>(value, key);
            else if (key == "max_iterations") p.max_iterations = json_value<std::size_t>(value, key);
            else if (key == "tolerance") p.tolerance = json_value<double>(value, key);
            else known = false;
          } else if constexpr (std::is_same_v<P, MlpParams>) {
            if (key == "hidden") p.hidden = json_value<std::size_t>(value, key);
            else if (key == "learning_rate") p.learning_rate = json_value<double>(value, key);
            else if (key == "optimizer") p.optimizer = parse_optimizer(json_value<std::string>(value, key));
            else if (key == "batch_size") p.batch_size = json_value<std::size_t>(value, key);
            else if (key == "max_epochs") p.max_epochs = json_value<std::size_t>(value, key);
            else if (key == "patience") p.patience = json_value<std::size_t>(value, key);
            else if (key == "min_delta") p.min_delta = json_value<double>(value, key);
            else if (key == "validation_fraction") p.validation_fraction = json_value<double>(value, key);
            else known = false;
          } else if constexpr (std::is_same_v<P, ForestParams>) {
            if (key == "n_trees") p.n_trees = json_value<std::size_t>(value, key);
            else if (key == "max_depth") {
              p.max_depth = value.is_null() ? std::nullopt : std::optional(json_value<std::size_t>(value, key));
            } else if (key == "min_samples_leaf") p.min_samples_leaf = json_value<std::size_t>(value, key);
            else known = false;
          } else {
            if (key == "n_estimators") p.n_estimators = json_value<std::size_t>(value, key);
            else if (key == "max_depth") p.max_depth = json_value<std::size_t>(value, key);
            else if (key == "learning_rate") p.learning_rate = json_value<double>(value, key);
            else if (key == "lambda") p.lambda = json_value<double>(value, key);
            else if (key == "min_child_weight") p.min_child_weight = json_value<double>(value, key);
            else known = false;
          }
        },
        params);
    if (!known) {
      throw UsageError("unknown " + std::string(to_string(family)) + " hyperparameter '" + key + "'");
    }
  }
  check_params(params);
  return params;
}

nlohmann::ordered_json to_json(const GridSearchResult& result) {
  nlohmann::ordered_json points = nlohmann::ordered_json::array();
  for (const auto& point : result.points) {
    points.push_back({{"params", params_to_json(point.params)},
                      {"mean_f1", point.mean_f1},
                      {"std_f1", point.std_f1},
                      {"mean_auc", point.mean_auc},
                      {"fold_f1", point.fold_f1},
                      {"fold_auc", point.fold_auc}});
  }
  return {{"best_index", result.best_index},
          {"best", params_to_json(result.best)},
          {"folds", result.folds},
          {"seed", result.seed},
          {"points", std::move(points)}};
}

}  // namespace gchk
