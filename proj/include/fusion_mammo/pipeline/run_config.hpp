#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fusion_mammo/ml/knn.hpp"
#include "fusion_mammo/ml/trees.hpp"
#include "fusion_mammo/pipeline/manifest.hpp"

namespace fusion_mammo::pipeline {

enum class ClassifierKind { knn, rf, xgb };
enum class FeatureSet { deep, fused };

std::string_view to_string(ClassifierKind k);
std::string_view to_string(FeatureSet s);
/// ArgumentError on unknown names.
ClassifierKind parse_classifier(std::string_view name);
FeatureSet parse_feature_set(std::string_view name);

/// Every setting of a run. Text form is one `section.key = value` per line;
/// '#' starts a comment.
struct RunConfig {
  // dataset
  std::vector<std::filesystem::path> csv_paths;
  std::filesystem::path image_root;
  std::size_t synthetic_n = 0;  // > 0: generate instead of ingesting
  std::uint64_t synthetic_seed = 7;
  SplitPolicy split_policy = SplitPolicy::patient_grouped;
  double test_fraction = 0.2;
  bool published_split = true;
  std::size_t subset = 0;  // > 0: seeded label-stratified subsample

  std::uint64_t seed = 0;

  // network
  std::string profile = "canonical";
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;

  FeatureSet feature_set = FeatureSet::fused;
  ClassifierKind classifier = ClassifierKind::xgb;
  ml::KnnConfig knn{};
  ml::ForestConfig forest{};
  ml::BoostConfig boost{};
};

/// Known keys with one-line descriptions, in canonical order.
const std::vector<std::pair<std::string, std::string>>& run_config_keys();

/// Applies one setting; ArgumentError naming the key if it is unknown or
/// the value does not parse.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);
/// ArgumentError naming the offending key and line.
RunConfig parse_run_config(std::string_view text, std::string_view source = "config");
/// StateError when the file does not exist.
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical text for every key; parse_run_config(to_text(c)) == c.
std::string to_text(const RunConfig& cfg);
/// Hash of the canonical text.
std::string config_fingerprint(const RunConfig& cfg);

}  // namespace fusion_mammo::pipeline
