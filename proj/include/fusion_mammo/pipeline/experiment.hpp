#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fusion_mammo/ml/dataset.hpp"
#include "fusion_mammo/ml/knn.hpp"
#include "fusion_mammo/ml/trees.hpp"
#include "fusion_mammo/pipeline/feature_store.hpp"
#include "fusion_mammo/pipeline/manifest.hpp"
#include "fusion_mammo/pipeline/report.hpp"
#include "fusion_mammo/pipeline/run_config.hpp"

namespace fusion_mammo::pipeline {

/// A trained classifier together with the feature set it expects.
class Classifier {
 public:
  static Classifier fit(ClassifierKind kind, FeatureSet features, const ml::LabeledMatrix& train,
                        const RunConfig& cfg);

  ClassifierKind kind() const { return kind_; }
  FeatureSet feature_set() const { return features_; }
  std::size_t input_length() const;
  ml::Prediction predict(std::span<const float> x) const;

  // "CLSF", u16 version, u8 kind, u8 feature set, u64 network fingerprint,
  // then the KNN or tree-ensemble payload.
  std::vector<std::byte> serialize() const;
  static Classifier deserialize(std::span<const std::byte> bytes);
  void save(const std::filesystem::path& path) const;
  /// StateError naming the train-clf stage when the file is missing.
  static Classifier load(const std::filesystem::path& path);

  /// Network the deep features came from (0 if unknown).
  std::uint64_t network_fingerprint = 0;

 private:
  ClassifierKind kind_ = ClassifierKind::knn;
  FeatureSet features_ = FeatureSet::fused;
  std::variant<ml::KnnModel, ml::TreeEnsemble> model_;
};

struct MatrixResult {
  ml::LabeledMatrix matrix;
  std::vector<std::string> warnings;
};

/// Feature matrix of one split. Fused vectors are read from the store, or
/// concatenated from stored deep/hog/lbp vectors when absent. A missing
/// vector raises StateError naming the extract stage to run. When
/// expected_network is set, vectors from another network add a warning.
MatrixResult build_matrix(const DatasetManifest& manifest, const FeatureStore& store, Split split,
                          FeatureSet features, std::optional<std::uint64_t> expected_network = std::nullopt);

/// Evaluates a classifier on the test split.
EvalReport evaluate_classifier(const Classifier& clf, const DatasetManifest& manifest, const FeatureStore& store,
                               const RunConfig& cfg, std::optional<std::uint64_t> expected_network = std::nullopt);

/// Trains on the train split and evaluates on the test split.
EvalReport run_experiment(const DatasetManifest& manifest, const FeatureStore& store, FeatureSet features,
                          ClassifierKind kind, const RunConfig& cfg,
                          std::optional<std::uint64_t> expected_network = std::nullopt);

}  // namespace fusion_mammo::pipeline
