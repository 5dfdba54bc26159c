#include "fusion_mammo/pipeline/fusion.hpp"

#include <string>
#include <vector>

#include "fusion_mammo/error.hpp"

namespace fusion_mammo::pipeline {
namespace {

void check(const FeatureVector& v, FeatureTag want, const char* component) {
  if (v.tag() != want || v.size() != expected_length(want)) {
    throw DimensionError(std::string("fuse_features: ") + component + " component has tag " +
                         std::string(to_string(v.tag())) + " and length " + std::to_string(v.size()) +
                         ", expected tag " + std::string(to_string(want)) + " and length " +
                         std::to_string(expected_length(want)));
  }
}

}  // namespace

FeatureVector fuse_features(const FeatureVector& deep, const FeatureVector& hog, const FeatureVector& lbp) {
  check(deep, FeatureTag::deep, "deep");
  check(hog, FeatureTag::hog, "hog");
  check(lbp, FeatureTag::lbp, "lbp");
  std::vector<float> out;
  out.reserve(kFusedLength);
  out.insert(out.end(), deep.values().begin(), deep.values().end());
  out.insert(out.end(), hog.values().begin(), hog.values().end());
  out.insert(out.end(), lbp.values().begin(), lbp.values().end());
  return FeatureVector(FeatureTag::fused, std::move(out));
}

}  // namespace fusion_mammo::pipeline
