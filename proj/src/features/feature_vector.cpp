#include "fusion_mammo/features/feature_vector.hpp"

#include <string>

#include "fusion_mammo/error.hpp"

namespace fusion_mammo {

std::size_t expected_length(FeatureTag tag) {
  switch (tag) {
    case FeatureTag::deep: return kDeepLength;
    case FeatureTag::hog: return kHogLength;
    case FeatureTag::lbp: return kLbpLength;
    case FeatureTag::fused: return kFusedLength;
  }
  throw ArgumentError("unknown feature tag");
}

std::string_view to_string(FeatureTag tag) {
  switch (tag) {
    case FeatureTag::deep: return "deep";
    case FeatureTag::hog: return "hog";
    case FeatureTag::lbp: return "lbp";
    case FeatureTag::fused: return "fused";
  }
  return "unknown";
}

FeatureTag parse_feature_tag(std::string_view name) {
  if (name == "deep") return FeatureTag::deep;
  if (name == "hog") return FeatureTag::hog;
  if (name == "lbp") return FeatureTag::lbp;
  if (name == "fused") return FeatureTag::fused;
  throw ArgumentError("unknown feature tag \"" + std::string(name) + "\" (expected deep|hog|lbp|fused)");
}

FeatureVector::FeatureVector(FeatureTag tag, std::vector<float> values) : tag_(tag), values_(std::move(values)) {
  if (values_.size() != expected_length(tag)) {
    throw DimensionError(std::string(to_string(tag)) + " feature vector must have " +
                         std::to_string(expected_length(tag)) + " values, got " + std::to_string(values_.size()));
  }
}

}  // namespace fusion_mammo
