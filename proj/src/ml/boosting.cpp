#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/ml/trees.hpp"

namespace fusion_mammo::ml {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double split_gain(double gl, double hl, double gr, double hr, double lambda) {
  const double g = gl + gr;
  const double h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda));
}

double leaf_weight(double g, double h, double lambda) { return -g / (h + lambda); }

namespace {

constexpr std::int32_t kDone = -1;

struct ActiveNode {
  std::size_t tree_node;
  double g = 0.0;
  double h = 0.0;
  // best split found so far this level
  double best_gain = 0.0;
  bool has_split = false;
  std::size_t feature = 0;
  float threshold = 0.0f;
  // scan state for the feature being processed
  double scan_g = 0.0;
  double scan_h = 0.0;
  float last = 0.0f;
  bool seen = false;
};

void compute_gradients(BoostObjective objective, std::span<const double> margin, std::span<const double> targets,
                       std::vector<double>& g, std::vector<double>& h) {
  for (std::size_t i = 0; i < margin.size(); ++i) {
    if (objective == BoostObjective::logistic) {
      const double p = sigmoid(margin[i]);
      g[i] = p - targets[i];
      h[i] = std::max(p * (1.0 - p), kHessianFloor);
    } else {
      g[i] = margin[i] - targets[i];
      h[i] = 1.0;
    }
  }
}

DecisionTree grow_boosted_tree(std::span<const float> values, std::size_t cols,
                               const std::vector<std::vector<std::uint32_t>>& sorted, const std::vector<double>& g,
                               const std::vector<double>& h, const BoostConfig& config,
                               std::vector<std::int32_t>& slot) {
  const std::size_t n = g.size();
  DecisionTree tree;
  tree.max_depth = config.max_depth;
  tree.nodes.emplace_back();

  std::vector<ActiveNode> active(1);
  active[0].tree_node = 0;
  for (std::size_t i = 0; i < n; ++i) {
    active[0].g += g[i];
    active[0].h += h[i];
  }
  std::fill(slot.begin(), slot.end(), 0);

  for (std::size_t depth = 0; !active.empty(); ++depth) {
    if (depth < config.max_depth) {
      for (std::size_t f = 0; f < cols; ++f) {
        for (auto& a : active) {
          a.scan_g = 0.0;
          a.scan_h = 0.0;
          a.seen = false;
        }
        for (std::uint32_t row : sorted[f]) {
          const std::int32_t s = slot[row];
          if (s == kDone) continue;
          ActiveNode& a = active[static_cast<std::size_t>(s)];
          const float v = values[static_cast<std::size_t>(row) * cols + f];
          if (a.seen && v != a.last) {
            const double gain = split_gain(a.scan_g, a.scan_h, a.g - a.scan_g, a.h - a.scan_h, config.lambda);
            if (gain > config.gamma && (!a.has_split || gain > a.best_gain)) {
              a.has_split = true;
              a.best_gain = gain;
              a.feature = f;
              a.threshold = split_threshold(a.last, v);
            }
          }
          a.scan_g += g[row];
          a.scan_h += h[row];
          a.last = v;
          a.seen = true;
        }
      }
    }

    // Finalize this level: split nodes get two children, the rest become leaves.
    std::vector<ActiveNode> next;
    std::vector<std::int32_t> child_slot(active.size() * 2, kDone);
    for (std::size_t s = 0; s < active.size(); ++s) {
      const ActiveNode& a = active[s];
      if (!a.has_split) {
        tree.nodes[a.tree_node].value = leaf_weight(a.g, a.h, config.lambda);
        continue;
      }
      const auto left = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      TreeNode& node = tree.nodes[a.tree_node];
      node.feature = static_cast<std::int32_t>(a.feature);
      node.threshold = a.threshold;
      node.left = left;
      node.right = left + 1;
      child_slot[2 * s] = static_cast<std::int32_t>(next.size());
      next.push_back(ActiveNode{static_cast<std::size_t>(left)});
      child_slot[2 * s + 1] = static_cast<std::int32_t>(next.size());
      next.push_back(ActiveNode{static_cast<std::size_t>(left + 1)});
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (slot[i] == kDone) continue;
      const auto s = static_cast<std::size_t>(slot[i]);
      const ActiveNode& a = active[s];
      if (!a.has_split) {
        slot[i] = kDone;
        continue;
      }
      const bool go_left = values[i * cols + a.feature] <= a.threshold;
      const std::int32_t c = child_slot[2 * s + (go_left ? 0 : 1)];
      slot[i] = c;
      next[static_cast<std::size_t>(c)].g += g[i];
      next[static_cast<std::size_t>(c)].h += h[i];
    }
    active = std::move(next);
  }
  return tree;
}

}  // namespace

TreeEnsemble boost_fit(std::span<const float> values, std::size_t cols, std::span<const double> targets,
                       const BoostConfig& config) {
  if (cols == 0) throw ArgumentError("boost_fit: zero feature columns");
  if (values.size() != targets.size() * cols) {
    throw DimensionError("boost_fit: " + std::to_string(values.size()) + " values for " +
                         std::to_string(targets.size()) + " targets of " + std::to_string(cols) + " columns");
  }
  if (targets.empty()) throw ArgumentError("boost_fit: no training rows");
  if (!(config.learning_rate > 0.0)) throw ArgumentError("boost_fit: learning rate must be > 0");
  if (!(config.lambda >= 0.0)) throw ArgumentError("boost_fit: lambda must be >= 0");
  if (!(config.gamma >= 0.0)) throw ArgumentError("boost_fit: gamma must be >= 0");
  for (float v : values) {
    if (!std::isfinite(v)) throw DataError("boost_fit: non-finite feature value");
  }
  if (config.objective == BoostObjective::logistic) {
    for (double t : targets) {
      if (t != 0.0 && t != 1.0) throw ArgumentError("boost_fit: logistic targets must be 0 or 1");
    }
  }

  const std::size_t n = targets.size();
  std::vector<std::vector<std::uint32_t>> sorted(cols, std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < cols; ++f) {
    auto& order = sorted[f];
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return values[a * cols + f] < values[b * cols + f];
    });
  }

  TreeEnsemble e;
  e.mode = EnsembleMode::boosted;
  e.objective = config.objective;
  e.feature_count = cols;
  e.tree_count = config.rounds;
  e.max_depth = config.max_depth;
  e.seed = config.seed;
  e.learning_rate = config.learning_rate;
  e.lambda = config.lambda;
  e.gamma = config.gamma;
  e.base_score = config.base_score;

  std::vector<double> margin(n, config.base_score), g(n), h(n);
  std::vector<std::int32_t> slot(n);
  for (std::size_t round = 0; round < config.rounds; ++round) {
    compute_gradients(config.objective, margin, targets, g, h);
    DecisionTree tree = grow_boosted_tree(values, cols, sorted, g, h, config, slot);
    for (std::size_t i = 0; i < n; ++i) {
      margin[i] += config.learning_rate * tree.predict(values.subspan(i * cols, cols));
    }
    e.trees.push_back(std::move(tree));
  }
  return e;
}

TreeEnsemble xgb_fit(const LabeledMatrix& m, const BoostConfig& config) {
  if (!m.has_both_classes()) throw ArgumentError("xgb_fit: training data contains a single class");
  m.require_finite();
  std::vector<double> targets(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) targets[i] = m.label(i);
  BoostConfig logistic = config;
  logistic.objective = BoostObjective::logistic;
  return boost_fit(m.values(), m.cols(), targets, logistic);
}

double boosted_margin(const TreeEnsemble& ensemble, std::span<const float> x) {
  if (ensemble.mode != EnsembleMode::boosted) throw ArgumentError("boosted_margin on a forest ensemble");
  if (x.size() != ensemble.feature_count) {
    throw DimensionError("boosted model: input of length " + std::to_string(x.size()) + ", model has " +
                         std::to_string(ensemble.feature_count));
  }
  double sum = 0.0;
  for (const auto& tree : ensemble.trees) sum += tree.predict(x);
  return ensemble.base_score + ensemble.learning_rate * sum;
}

Prediction xgb_predict(const TreeEnsemble& ensemble, std::span<const float> x) {
  const double p = sigmoid(boosted_margin(ensemble, x));
  return {p >= 0.5 ? 1 : 0, p};
}

}  // namespace fusion_mammo::ml
