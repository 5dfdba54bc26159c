#include "fusion_mammo/features/gray_image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fusion_mammo/error.hpp"

namespace fusion_mammo {

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<float> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width_ == 0 || height_ == 0 || width_ * height_ != pixels_.size()) {
    throw DimensionError("gray image " + std::to_string(width_) + "x" + std::to_string(height_) + " needs " +
                         std::to_string(width_ * height_) + " pixels, got " + std::to_string(pixels_.size()));
  }
  for (std::size_t i = 0; i < pixels_.size(); ++i) {
    const float v = pixels_[i];
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw DataError("gray image pixel " + std::to_string(i) + " = " + std::to_string(v) + " outside [0,1]");
    }
  }
}

GrayImage::GrayImage(std::size_t width, std::size_t height, float fill)
    : GrayImage(width, height, std::vector<float>(width * height, fill)) {}

float GrayImage::clamped(std::ptrdiff_t x, std::ptrdiff_t y) const {
  x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(width_) - 1);
  y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(height_) - 1);
  return pixels_[static_cast<std::size_t>(y) * width_ + static_cast<std::size_t>(x)];
}

void GrayImage::set(std::size_t x, std::size_t y, float value) {
  if (!std::isfinite(value) || value < 0.0f || value > 1.0f) {
    throw DataError("gray image value " + std::to_string(value) + " outside [0,1]");
  }
  pixels_[y * width_ + x] = value;
}

}  // namespace fusion_mammo
