#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/ml/trees.hpp"
#include "fusion_mammo/util/parallel.hpp"
#include "fusion_mammo/util/rng.hpp"

namespace fusion_mammo::ml {
namespace {

double gini_term(std::size_t n0, std::size_t n1) {
  const std::size_t n = n0 + n1;
  if (n == 0) return 0.0;
  const double a = static_cast<double>(n0);
  const double b = static_cast<double>(n1);
  return static_cast<double>(n) - (a * a + b * b) / static_cast<double>(n);
}

struct BuildTask {
  std::size_t node;
  std::size_t depth;
  std::vector<std::size_t> samples;
};

}  // namespace

GiniSplit find_best_gini_split(const LabeledMatrix& m, std::span<const std::size_t> samples,
                               std::span<const std::size_t> features) {
  GiniSplit best;
  if (samples.size() < 2) return best;
  std::size_t total[2] = {0, 0};
  for (std::size_t s : samples) ++total[m.label(s)];

  std::vector<std::pair<float, std::uint8_t>> column(samples.size());
  for (std::size_t f : features) {
    if (f >= m.cols()) throw ArgumentError("gini split: feature " + std::to_string(f) + " out of range");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      column[i] = {m.at(samples[i], f), static_cast<std::uint8_t>(m.label(samples[i]))};
    }
    std::sort(column.begin(), column.end());
    std::size_t left[2] = {0, 0};
    for (std::size_t i = 0; i + 1 < column.size(); ++i) {
      ++left[column[i].second];
      if (column[i].first == column[i + 1].first) continue;
      const double impurity =
          gini_term(left[0], left[1]) + gini_term(total[0] - left[0], total[1] - left[1]);
      if (!best.valid || impurity < best.weighted_impurity) {
        best.valid = true;
        best.feature = f;
        best.threshold = split_threshold(column[i].first, column[i + 1].first);
        best.weighted_impurity = impurity;
        best.left_count = i + 1;
      }
    }
  }
  return best;
}

namespace {

DecisionTree grow_gini_tree(const LabeledMatrix& m, std::vector<std::size_t> samples, std::size_t max_depth,
                            std::size_t max_features, Rng& rng) {
  DecisionTree tree;
  tree.max_depth = max_depth;
  tree.nodes.emplace_back();
  std::vector<std::size_t> feature_order(m.cols());
  std::iota(feature_order.begin(), feature_order.end(), std::size_t{0});

  std::vector<BuildTask> stack;
  stack.push_back({0, 0, std::move(samples)});
  while (!stack.empty()) {
    BuildTask task = std::move(stack.back());
    stack.pop_back();
    std::size_t ones = 0;
    for (std::size_t s : task.samples) ones += static_cast<std::size_t>(m.label(s));
    tree.nodes[task.node].value = static_cast<double>(ones) / static_cast<double>(task.samples.size());
    if (ones == 0 || ones == task.samples.size() || task.depth >= max_depth) continue;

    // Draw max_features candidates; if none of them can split the node,
    // keep drawing from the remaining features in the same random order.
    rng.shuffle(std::span(feature_order));
    GiniSplit split;
    for (std::size_t start = 0; start < feature_order.size() && !split.valid; start += max_features) {
      const std::size_t count = std::min(max_features, feature_order.size() - start);
      split = find_best_gini_split(m, task.samples, std::span(feature_order).subspan(start, count));
    }
    if (!split.valid) continue;

    std::vector<std::size_t> left, right;
    for (std::size_t s : task.samples) {
      (m.at(s, split.feature) <= split.threshold ? left : right).push_back(s);
    }
    const auto left_id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[task.node];
    node.feature = static_cast<std::int32_t>(split.feature);
    node.threshold = split.threshold;
    node.left = left_id;
    node.right = left_id + 1;
    stack.push_back({static_cast<std::size_t>(left_id + 1), task.depth + 1, std::move(right)});
    stack.push_back({static_cast<std::size_t>(left_id), task.depth + 1, std::move(left)});
  }
  return tree;
}

}  // namespace

TreeEnsemble forest_fit(const LabeledMatrix& m, const ForestConfig& config) {
  if (m.rows() < 2) throw ArgumentError("forest_fit needs at least 2 rows");
  if (!m.has_both_classes()) throw ArgumentError("forest_fit: training data contains a single class");
  if (config.trees == 0) throw ArgumentError("forest_fit: tree count must be positive");
  m.require_finite();
  const std::size_t max_features =
      config.max_features > 0
          ? std::min(config.max_features, m.cols())
          : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(m.cols())))));

  TreeEnsemble forest;
  forest.mode = EnsembleMode::forest;
  forest.feature_count = m.cols();
  forest.tree_count = config.trees;
  forest.max_depth = config.max_depth;
  forest.seed = config.seed;
  forest.trees.resize(config.trees);
  parallel_for(config.trees, [&](std::size_t t) {
    Rng rng(mix_seed(config.seed, t));
    std::vector<std::size_t> samples(m.rows());
    if (config.bootstrap) {
      for (auto& s : samples) s = static_cast<std::size_t>(rng.below(m.rows()));
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    forest.trees[t] = grow_gini_tree(m, std::move(samples), config.max_depth, max_features, rng);
  });
  return forest;
}

Prediction forest_predict(const TreeEnsemble& forest, std::span<const float> x) {
  if (forest.mode != EnsembleMode::forest) throw ArgumentError("forest_predict on a boosted ensemble");
  if (x.size() != forest.feature_count) {
    throw DimensionError("forest_predict: input of length " + std::to_string(x.size()) + ", model has " +
                         std::to_string(forest.feature_count));
  }
  if (forest.trees.empty()) throw StateError("forest_predict: ensemble has no trees");
  std::size_t votes = 0;
  for (const auto& tree : forest.trees) votes += tree.predict(x) >= 0.5 ? 1 : 0;
  const double p = static_cast<double>(votes) / static_cast<double>(forest.trees.size());
  return {p >= 0.5 ? 1 : 0, p};
}

}  // namespace fusion_mammo::ml
