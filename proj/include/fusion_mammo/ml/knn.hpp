#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "fusion_mammo/ml/dataset.hpp"

namespace fusion_mammo::ml {

enum class KnnWeighting : std::uint8_t { uniform = 0, inverse_distance = 1 };

struct KnnConfig {
  std::size_t k = 5;
  KnnWeighting weighting = KnnWeighting::inverse_distance;
  bool standardize = true;
};

struct Neighbor {
  std::size_t index;
  double distance;  // Euclidean
};

/// Weighted class vote over the given neighbours:
///   p(a|x) = sum_k W_k [label_k == a] / sum_k W_k
/// Inverse-distance weights are 1/d; if any neighbour sits at distance 0,
/// the zero-distance neighbours get weight 1 and the rest weight 0.
std::array<double, 2> weighted_vote(std::span<const Neighbor> neighbors, std::span<const std::uint8_t> labels,
                                    KnnWeighting weighting);

class KnnModel {
 public:
  /// ArgumentError when k is 0 or exceeds the row count.
  static KnnModel fit(const LabeledMatrix& train, KnnConfig config = {});

  /// The k nearest training rows by Euclidean distance; ties at equal
  /// distance resolve by ascending row index and exactly k are kept.
  std::vector<Neighbor> nearest(std::span<const float> x) const;
  std::array<double, 2> predict_proba(std::span<const float> x) const;
  Prediction predict(std::span<const float> x) const;

  const KnnConfig& config() const { return config_; }
  const LabeledMatrix& training() const { return train_; }
  const std::optional<StandardizationStats>& stats() const { return stats_; }

  // "KNNM", u16 version, config, dims, stats, rows (float32 LE), labels.
  std::vector<std::byte> serialize() const;
  static KnnModel deserialize(std::span<const std::byte> bytes);

 private:
  KnnConfig config_;
  LabeledMatrix train_;  // standardized when config_.standardize
  std::optional<StandardizationStats> stats_;
};

}  // namespace fusion_mammo::ml
