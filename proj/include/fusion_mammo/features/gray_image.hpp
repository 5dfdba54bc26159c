#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fusion_mammo {

/// Single-channel image, row-major, intensities in [0,1].
class GrayImage {
 public:
  GrayImage() = default;
  /// Throws DimensionError on a size mismatch and DataError on values
  /// outside [0,1] or non-finite values.
  GrayImage(std::size_t width, std::size_t height, std::vector<float> pixels);
  GrayImage(std::size_t width, std::size_t height, float fill = 0.0f);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::span<const float> pixels() const { return pixels_; }

  float at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }
  /// Edge-replicating access for any signed coordinate.
  float clamped(std::ptrdiff_t x, std::ptrdiff_t y) const;
  void set(std::size_t x, std::size_t y, float value);

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<float> pixels_;
};

}  // namespace fusion_mammo
