#pragma once

#include "fusion_mammo/features/feature_vector.hpp"

namespace fusion_mammo::pipeline {

inline constexpr std::size_t kFusedHogOffset = kDeepLength;
inline constexpr std::size_t kFusedLbpOffset = kDeepLength + kHogLength;

/// [deep | hog | lbp], 2816 values. DimensionError naming the component
/// whose tag or length is wrong.
FeatureVector fuse_features(const FeatureVector& deep, const FeatureVector& hog, const FeatureVector& lbp);

}  // namespace fusion_mammo::pipeline
