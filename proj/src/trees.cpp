// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gchk/models.hpp"
#include "gchk/random.hpp"

namespace gchk {

double Tree::predict(std::span<const double> row) const {
  std::int32_t at = 0;
  while (nodes[at].feature >= 0) {
    const Node& node = nodes[at];
    at = row[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes[at].value;
}

std::size_t Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[nodes[i].left] = level[i] + 1;
      level[nodes[i].right] = level[i] + 1;
    }
  }
  return deepest;
}

namespace detail {

std::vector<std::vector<std::uint32_t>> sort_columns(const Matrix& x) {
  std::vector<std::vector<std::uint32_t>> sorted(x.cols);
  for (std::size_t f = 0; f < x.cols; ++f) {
    auto& order = sorted[f];
    order.resize(x.rows);
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
  }
  return sorted;
}

namespace {

// Additive per-row statistics. Gini trees: (weight, weighted positives).
// Boosting trees: (hessian, gradient).
struct Stats {
  double w = 0.0;
  double s = 0.0;

  Stats& operator+=(const Stats& o) {
    w += o.w;
    s += o.s;
    return *this;
  }
  friend Stats operator-(Stats a, const Stats& b) { return {a.w - b.w, a.s - b.s}; }
};

struct GiniCriterion {
  std::size_t min_samples_leaf;

  // Sum over children of this score, minus the parent's, is proportional to the
  // weighted Gini decrease.
  double score(const Stats& t) const { return t.w > 0.0 ? (t.s * t.s + (t.w - t.s) * (t.w - t.s)) / t.w : 0.0; }
  bool admissible(const Stats& t) const { return t.w >= static_cast<double>(min_samples_leaf); }
  double leaf(const Stats& t) const { return t.w > 0.0 ? t.s / t.w : 0.0; }
};

struct BoostCriterion {
  double lambda;
  double min_child_weight;

  double score(const Stats& t) const { return t.s * t.s / (t.w + lambda); }
  bool admissible(const Stats& t) const { return t.w >= min_child_weight; }
  double leaf(const Stats& t) const { return -t.s / (t.w + lambda); }
};

struct OpenNode {
  std::int32_t id = 0;
  Stats total;
  std::vector<std::uint8_t> candidates;
  // best split so far
  double gain = 0.0;
  std::int32_t feature = -1;
  double threshold = 0.0;
  Stats left;
  // scan state for the current feature
  Stats running;
  double last = 0.0;
  bool has_last = false;
};

// Level-wise exact greedy growth: for every feature, one pass over the presorted
// rows evaluates split points for all open nodes of the current depth.
template <typename Criterion, typename CandidateFn>
Tree grow(const Matrix& x, std::span<const Stats> per_row, std::span<const std::uint8_t> in_tree,
          const std::vector<std::vector<std::uint32_t>>& sorted, std::optional<std::size_t> max_depth,
          const Criterion& criterion, CandidateFn&& candidates) {
  Tree tree;
  std::vector<std::int32_t> node_of(x.rows, -1);
  Stats root;
  for (std::size_t r = 0; r < x.rows; ++r) {
    if (!in_tree[r]) continue;
    node_of[r] = 0;
    root += per_row[r];
  }
  tree.nodes.push_back({});

  std::vector<OpenNode> open(1);
  open[0].id = 0;
  open[0].total = root;
  std::size_t depth = 0;

  while (!open.empty()) {
    const bool may_split = !max_depth || depth < *max_depth;
    std::vector<std::int32_t> slot(tree.nodes.size(), -1);
    for (std::size_t i = 0; i < open.size(); ++i) {
      slot[open[i].id] = static_cast<std::int32_t>(i);
      open[i].candidates = candidates();
      // splits must beat this to count; scaled to the node so round-off never splits
      open[i].gain = 1e-12 * std::max(1.0, std::abs(criterion.score(open[i].total)));
    }

    if (may_split) {
      for (std::size_t f = 0; f < x.cols; ++f) {
        for (auto& node : open) {
          node.running = {};
          node.has_last = false;
        }
        for (std::uint32_t r : sorted[f]) {
          const std::int32_t id = node_of[r];
          if (id < 0 || slot[id] < 0) continue;
          OpenNode& node = open[slot[id]];
          if (!node.candidates[f]) continue;
          const double v = x(r, f);
          if (node.has_last && v > node.last) {
            const Stats right = node.total - node.running;
            if (criterion.admissible(node.running) && criterion.admissible(right)) {
              const double gain = criterion.score(node.running) + criterion.score(right) -
                                  criterion.score(node.total);
              if (gain > node.gain) {
                double threshold = node.last + (v - node.last) / 2.0;
                if (!(threshold < v)) threshold = node.last;
                node.gain = gain;
                node.feature = static_cast<std::int32_t>(f);
                node.threshold = threshold;
                node.left = node.running;
              }
            }
          }
          node.running += per_row[r];
          node.last = v;
          node.has_last = true;
        }
      }
    }

    std::vector<OpenNode> next;
    for (auto& node : open) {
      if (node.feature < 0) {
        tree.nodes[node.id].value = criterion.leaf(node.total);
        continue;
      }
      const auto left = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      Tree::Node& split = tree.nodes[node.id];
      split.feature = node.feature;
      split.threshold = node.threshold;
      split.left = left;
      split.right = left + 1;
      split.value = criterion.leaf(node.total);

      OpenNode l;
      l.id = left;
      l.total = node.left;
      OpenNode r;
      r.id = left + 1;
      r.total = node.total - node.left;
      next.push_back(std::move(l));
      next.push_back(std::move(r));
    }

    for (std::size_t row = 0; row < x.rows; ++row) {
      const std::int32_t id = node_of[row];
      if (id < 0) continue;
      const Tree::Node& node = tree.nodes[id];
      if (node.feature < 0) {
        node_of[row] = -1;
        continue;
      }
      node_of[row] = x(row, node.feature) <= node.threshold ? node.left : node.right;
    }
    open = std::move(next);
    ++depth;
  }
  return tree;
}

}  // namespace

Tree grow_gini_tree(const Matrix& x, std::span<const int> y, std::span<const double> weights,
                    const std::vector<std::vector<std::uint32_t>>& sorted,
                    std::optional<std::size_t> max_depth, std::size_t candidates,
                    std::size_t min_samples_leaf, std::uint64_t seed) {
  std::vector<Stats> per_row(x.rows);
  std::vector<std::uint8_t> in_tree(x.rows, 0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    per_row[r] = {weights[r], weights[r] * y[r]};
    in_tree[r] = weights[r] > 0.0;
  }
  candidates = std::clamp<std::size_t>(candidates, 1, std::max<std::size_t>(1, x.cols));
  Rng rng(seed);
  std::vector<std::size_t> order(x.cols);
  auto draw = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::uint8_t> mask(x.cols, 0);
    for (std::size_t i = 0; i < candidates; ++i) {
      std::swap(order[i], order[i + rng.below(x.cols - i)]);
      mask[order[i]] = 1;
    }
    return mask;
  };
  return grow(x, per_row, in_tree, sorted, max_depth, GiniCriterion{min_samples_leaf}, draw);
}

Tree grow_boost_tree(const Matrix& x, std::span<const double> gradient, std::span<const double> hessian,
                     const std::vector<std::vector<std::uint32_t>>& sorted, std::size_t max_depth,
                     double lambda, double min_child_weight) {
  std::vector<Stats> per_row(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) per_row[r] = {hessian[r], gradient[r]};
  std::vector<std::uint8_t> in_tree(x.rows, 1);
  auto all = [&] { return std::vector<std::uint8_t>(x.cols, 1); };
  return grow(x, per_row, in_tree, sorted, max_depth, BoostCriterion{lambda, min_child_weight}, all);
}

}  // namespace detail

}  // namespace gchk
