#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace fusion_mammo {

enum class FeatureTag : std::uint8_t { deep = 0, hog = 1, lbp = 2, fused = 3 };

inline constexpr std::size_t kDeepLength = 256;
inline constexpr std::size_t kHogLength = 2304;
inline constexpr std::size_t kLbpLength = 256;
inline constexpr std::size_t kFusedLength = kDeepLength + kHogLength + kLbpLength;

std::size_t expected_length(FeatureTag tag);
std::string_view to_string(FeatureTag tag);
/// Throws ArgumentError for unknown names.
FeatureTag parse_feature_tag(std::string_view name);

/// Float vector whose length is fixed by its source tag.
class FeatureVector {
 public:
  /// Throws DimensionError when values.size() != expected_length(tag).
  FeatureVector(FeatureTag tag, std::vector<float> values);

  FeatureTag tag() const { return tag_; }
  std::size_t size() const { return values_.size(); }
  std::span<const float> values() const { return values_; }
  float operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  FeatureTag tag_;
  std::vector<float> values_;
};

}  // namespace fusion_mammo
