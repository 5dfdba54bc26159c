#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "fusion_mammo/ml/dataset.hpp"

namespace fusion_mammo::ml {

/// Internal nodes route x[feature] <= threshold to `left`. Leaves have
/// feature == -1 and carry `value`: the class-1 fraction for forest trees,
/// the leaf weight for boosted trees.
struct TreeNode {
  std::int32_t feature = -1;
  float threshold = 0.0f;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

inline constexpr std::size_t kUnlimitedDepth = std::numeric_limits<std::size_t>::max();

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t max_depth = kUnlimitedDepth;

  std::size_t leaf_index(std::span<const float> x) const;
  double predict(std::span<const float> x) const { return nodes[leaf_index(x)].value; }
  std::size_t leaf_count() const;
  std::size_t depth() const;
  /// Throws FormatError unless the nodes form one binary tree rooted at 0
  /// with in-range feature indices.
  void validate(std::size_t feature_count) const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

enum class EnsembleMode : std::uint8_t { forest = 0, boosted = 1 };
enum class BoostObjective : std::uint8_t { logistic = 0, squared_error = 1 };

struct TreeEnsemble {
  EnsembleMode mode = EnsembleMode::forest;
  BoostObjective objective = BoostObjective::logistic;
  std::size_t feature_count = 0;
  std::size_t tree_count = 0;  // configured rounds/trees
  std::size_t max_depth = kUnlimitedDepth;
  std::uint64_t seed = 0;
  double learning_rate = 0.0;  // boosted only
  double lambda = 0.0;
  double gamma = 0.0;
  double base_score = 0.0;
  std::vector<DecisionTree> trees;

  /// Boosted ensembles need learning_rate > 0, lambda >= 0, gamma >= 0.
  void validate() const;
  friend bool operator==(const TreeEnsemble&, const TreeEnsemble&) = default;
};

/// Midpoint threshold t with lo <= t < hi in float, so x <= t splits the two values.
float split_threshold(float lo, float hi);

// ---------------------------------------------------------------- forest --

struct GiniSplit {
  bool valid = false;
  std::size_t feature = 0;
  float threshold = 0.0f;
  /// Sum over children of n_c - (n_c0^2 + n_c1^2) / n_c, i.e. n times the
  /// weighted Gini impurity. Lower is better.
  double weighted_impurity = 0.0;
  std::size_t left_count = 0;
};

/// Best split over the listed features for the given (possibly repeated)
/// sample rows. Ties keep the earliest feature in `features`, then the
/// smallest threshold.
GiniSplit find_best_gini_split(const LabeledMatrix& m, std::span<const std::size_t> samples,
                               std::span<const std::size_t> features);

struct ForestConfig {
  std::size_t trees = 100;
  std::size_t max_depth = kUnlimitedDepth;
  std::uint64_t seed = 0;
  /// 0 selects floor(sqrt(d)).
  std::size_t max_features = 0;
  /// false trains every tree on the identity sample.
  bool bootstrap = true;
};

TreeEnsemble forest_fit(const LabeledMatrix& m, const ForestConfig& config);
/// Majority vote; probability is the fraction of trees voting class 1.
Prediction forest_predict(const TreeEnsemble& forest, std::span<const float> x);

// -------------------------------------------------------------- boosting --

struct BoostConfig {
  std::size_t rounds = 200;
  std::size_t max_depth = 6;
  double learning_rate = 0.1;
  double lambda = 1.0;
  double gamma = 0.0;
  double base_score = 0.0;
  std::uint64_t seed = 0;
  BoostObjective objective = BoostObjective::logistic;
};

inline constexpr double kHessianFloor = 1e-16;

/// Second-order gain of splitting (G,H) into (GL,HL) + (GR,HR), before the
/// gamma comparison: 0.5 * [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)].
double split_gain(double gl, double hl, double gr, double hr, double lambda);
/// -G / (H + lambda)
double leaf_weight(double g, double h, double lambda);

/// General fit on real-valued targets (logistic targets must be 0/1).
TreeEnsemble boost_fit(std::span<const float> values, std::size_t cols, std::span<const double> targets,
                       const BoostConfig& config);
/// Logistic-loss boosting on a labeled matrix. DataError on non-finite features.
TreeEnsemble xgb_fit(const LabeledMatrix& m, const BoostConfig& config);

/// base + eta * sum of tree outputs.
double boosted_margin(const TreeEnsemble& ensemble, std::span<const float> x);
/// sigmoid(margin); class 1 when probability >= 0.5.
Prediction xgb_predict(const TreeEnsemble& ensemble, std::span<const float> x);
double sigmoid(double z);

// ----------------------------------------------------------- persistence --

// "TREE", u16 version, header (mode, objective, hyperparameters, d), then
// per tree a node count and the flattened nodes, all little-endian.
inline constexpr std::uint16_t kTreeFormatVersion = 1;
std::vector<std::byte> serialize_ensemble(const TreeEnsemble& ensemble);
TreeEnsemble deserialize_ensemble(std::span<const std::byte> bytes);
void save_ensemble(const TreeEnsemble& ensemble, const std::filesystem::path& path);
TreeEnsemble load_ensemble(const std::filesystem::path& path);

}  // namespace fusion_mammo::ml
