#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "stackfuse/learners/common.hpp"

namespace stackfuse {

/// Flat CART tree. A node with feature < 0 is a leaf.
struct DecisionTree {
  struct Node {
    std::int64_t feature = -1;
    double threshold = 0.0;  // x[feature] <= threshold goes left
    std::size_t left = 0;
    std::size_t right = 0;
    std::vector<std::size_t> histogram;  // class counts of training rows reaching a leaf
  };

  std::vector<Node> nodes;

  const Node& leaf_for(std::span<const double> x) const {
    std::size_t at = 0;
    while (nodes[at].feature >= 0) {
      const auto& node = nodes[at];
      at = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return nodes[at];
  }

  std::size_t depth() const {
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 1}};
    std::size_t best = 0;
    while (!stack.empty()) {
      auto [at, depth] = stack.back();
      stack.pop_back();
      best = std::max(best, depth);
      if (nodes[at].feature >= 0) {
        stack.push_back({nodes[at].left, depth + 1});
        stack.push_back({nodes[at].right, depth + 1});
      }
    }
    return best;
  }
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::vector<Seed> tree_seeds;
  std::size_t n_trees = 0;
  std::size_t n_classes = 0;
  std::size_t dim = 0;
};

struct TreeOptions {
  std::size_t max_features = 0;  // candidate features per node, 1..d
  bool bootstrap = true;
};

namespace detail {

struct SplitChoice {
  std::int64_t feature = -1;
  double threshold = 0.0;
  double score = -1.0;  // sum_c L_c^2 / n_L + sum_c R_c^2 / n_R; larger is purer
};

/// Best Gini split of rows[begin, end) on one feature. Ties keep the lowest threshold.
inline void scan_feature(const Matrix& x, const std::vector<std::size_t>& y, std::size_t n_classes,
                         std::vector<std::size_t>& rows, std::size_t feature, SplitChoice& best,
                         std::vector<double>& left_counts, std::vector<double>& right_counts) {
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    const double va = x(a, feature);
    const double vb = x(b, feature);
    return va < vb || (va == vb && a < b);
  });
  std::fill(left_counts.begin(), left_counts.end(), 0.0);
  std::fill(right_counts.begin(), right_counts.end(), 0.0);
  for (auto r : rows) right_counts[y[r]] += 1.0;

  double left_sq = 0.0;
  double right_sq = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) right_sq += right_counts[c] * right_counts[c];

  const std::size_t n = rows.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t label = y[rows[i]];
    left_sq += 2.0 * left_counts[label] + 1.0;
    right_sq -= 2.0 * right_counts[label] - 1.0;
    left_counts[label] += 1.0;
    right_counts[label] -= 1.0;

    const double lo = x(rows[i], feature);
    const double hi = x(rows[i + 1], feature);
    if (!(lo < hi)) continue;
    const double n_left = static_cast<double>(i + 1);
    const double n_right = static_cast<double>(n - i - 1);
    const double score = left_sq / n_left + right_sq / n_right;
    if (score > best.score) {
      double threshold = lo + (hi - lo) * 0.5;
      if (!(threshold < hi)) threshold = lo;
      best = {static_cast<std::int64_t>(feature), threshold, score};
    }
  }
}

}  // namespace detail

/// Grows one CART tree (Gini) until nodes are pure or hold fewer than 2 rows.
/// At each node `max_features` candidate features are drawn; if none of them
/// admits a split the remaining features are tried before giving up.
inline DecisionTree grow_tree(const TrainingSet& data, const TreeOptions& options, Seed seed) {
  Rng rng(seed);
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  const std::size_t k = data.n_classes;

  std::vector<std::size_t> sample(n);
  if (options.bootstrap) {
    for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n));
  } else {
    std::iota(sample.begin(), sample.end(), std::size_t{0});
  }

  DecisionTree tree;
  struct Pending {
    std::size_t node;
    std::vector<std::size_t> rows;
  };
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, std::move(sample)});

  std::vector<std::size_t> features(d);
  std::vector<double> left_counts(k);
  std::vector<double> right_counts(k);

  while (!stack.empty()) {
    Pending job = std::move(stack.back());
    stack.pop_back();

    std::vector<std::size_t> histogram(k, 0);
    for (auto r : job.rows) ++histogram[data.y[r]];
    const auto nonzero = std::count_if(histogram.begin(), histogram.end(), [](auto c) { return c > 0; });

    detail::SplitChoice best;
    if (nonzero > 1 && job.rows.size() >= 2) {
      std::iota(features.begin(), features.end(), std::size_t{0});
      rng.shuffle(features);
      std::vector<std::size_t> scratch = job.rows;
      for (std::size_t f = 0; f < d; ++f) {
        if (f >= options.max_features && best.feature >= 0) break;
        detail::scan_feature(data.x, data.y, k, scratch, features[f], best, left_counts, right_counts);
      }
    }

    if (best.feature < 0) {
      tree.nodes[job.node].histogram = std::move(histogram);
      continue;
    }

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    const auto feature = static_cast<std::size_t>(best.feature);
    for (auto r : job.rows) {
      (data.x(r, feature) <= best.threshold ? left_rows : right_rows).push_back(r);
    }
    const std::size_t left = tree.nodes.size();
    tree.nodes.emplace_back();
    const std::size_t right = tree.nodes.size();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[job.node];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    stack.push_back({right, std::move(right_rows)});
    stack.push_back({left, std::move(left_rows)});
  }
  return tree;
}

inline std::size_t resolve_max_features(MaxFeatures mode, std::size_t d) {
  if (mode == MaxFeatures::all) return d;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
}

/// Tree t is grown from derive_seed(cfg.seed, t).
inline ForestModel train_random_forest(const TrainingSet& data, const TrainConfig& cfg) {
  cfg.validate();
  detail::require_trainable(data, "random forest");
  ForestModel model;
  model.n_trees = cfg.rf_trees;
  model.n_classes = data.n_classes;
  model.dim = data.dim();
  const TreeOptions options{resolve_max_features(cfg.rf_max_features, data.dim()), cfg.rf_bootstrap};
  for (std::size_t t = 0; t < cfg.rf_trees; ++t) {
    model.tree_seeds.push_back(derive_seed(cfg.seed, t));
    model.trees.push_back(grow_tree(data, options, model.tree_seeds.back()));
  }
  return model;
}

/// Mean over trees of each reached leaf's normalized class histogram.
inline Matrix predict_proba(const ForestModel& model, const Matrix& x) {
  detail::require_dim(model.dim, x);
  Matrix out(x.rows(), model.n_classes);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    auto dst = out.row(r);
    for (const auto& tree : model.trees) {
      const auto& leaf = tree.leaf_for(row);
      double total = 0.0;
      for (auto c : leaf.histogram) total += static_cast<double>(c);
      for (std::size_t c = 0; c < model.n_classes; ++c) dst[c] += static_cast<double>(leaf.histogram[c]) / total;
    }
    const double inv = 1.0 / static_cast<double>(model.trees.size());
    for (double& v : dst) v *= inv;
  }
  return out;
}

}  // namespace stackfuse
