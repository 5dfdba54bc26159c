#include "fusion_mammo/features/descriptors.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "fusion_mammo/error.hpp"

namespace fusion_mammo::features {

BinVote hog_bin_vote(double angle_degrees) {
  double a = std::fmod(angle_degrees, 180.0);
  if (a < 0.0) a += 180.0;
  if (a >= 180.0) a = 0.0;
  const double pos = a / kHogBinWidthDegrees;
  const double lower = std::floor(pos);
  const double frac = pos - lower;
  const auto lower_bin = static_cast<std::size_t>(lower) % kHogBins;
  return {lower_bin, 1.0 - frac, (lower_bin + 1) % kHogBins, frac};
}

FeatureVector compute_hog(const GrayImage& image) {
  if (image.width() != kHogImageSize || image.height() != kHogImageSize) {
    throw DimensionError("HOG expects a " + std::to_string(kHogImageSize) + "x" + std::to_string(kHogImageSize) +
                         " image, got " + std::to_string(image.width()) + "x" + std::to_string(image.height()));
  }
  // Pixels of the 256x256 padded image are image.clamped(x, y): the extra
  // row and column replicate the last ones, and the central differences at
  // the padded border use the same replication.
  constexpr std::size_t cells = kHogCellsPerSide;
  std::array<double, cells * cells * kHogBins> hist{};
  for (std::size_t y = 0; y < kHogPaddedSize; ++y) {
    const auto sy = static_cast<std::ptrdiff_t>(y);
    const std::ptrdiff_t up = sy == 0 ? 0 : sy - 1;
    const std::ptrdiff_t down = std::min<std::ptrdiff_t>(sy + 1, kHogPaddedSize - 1);
    for (std::size_t x = 0; x < kHogPaddedSize; ++x) {
      const auto sx = static_cast<std::ptrdiff_t>(x);
      const std::ptrdiff_t left = sx == 0 ? 0 : sx - 1;
      const std::ptrdiff_t right = std::min<std::ptrdiff_t>(sx + 1, kHogPaddedSize - 1);
      const double gx = static_cast<double>(image.clamped(right, sy)) - image.clamped(left, sy);
      const double gy = static_cast<double>(image.clamped(sx, down)) - image.clamped(sx, up);
      const double magnitude = std::hypot(gx, gy);
      if (magnitude == 0.0) continue;
      const double angle = std::atan2(gy, gx) * (180.0 / std::numbers::pi);
      const BinVote vote = hog_bin_vote(angle);
      double* cell = hist.data() + ((y / kHogCellPixels) * cells + x / kHogCellPixels) * kHogBins;
      cell[vote.lower_bin] += magnitude * vote.lower_weight;
      cell[vote.upper_bin] += magnitude * vote.upper_weight;
    }
  }

  std::vector<float> out(kHogLength, 0.0f);
  for (std::size_t c = 0; c < cells * cells; ++c) {
    const double* cell = hist.data() + c * kHogBins;
    double norm = 0.0;
    for (std::size_t b = 0; b < kHogBins; ++b) norm += cell[b] * cell[b];
    if (norm == 0.0) continue;
    norm = std::sqrt(norm);
    for (std::size_t b = 0; b < kHogBins; ++b) out[c * kHogBins + b] = static_cast<float>(cell[b] / norm);
  }
  return FeatureVector(FeatureTag::hog, std::move(out));
}

LbpCodeMap compute_lbp_codes(const GrayImage& image) {
  if (image.width() < 3 || image.height() < 3) {
    throw DimensionError("LBP needs at least a 3x3 image, got " + std::to_string(image.width()) + "x" +
                         std::to_string(image.height()));
  }
  LbpCodeMap map;
  map.width = image.width() - 2;
  map.height = image.height() - 2;
  map.codes.resize(map.width * map.height);
  for (std::size_t y = 1; y + 1 < image.height(); ++y) {
    for (std::size_t x = 1; x + 1 < image.width(); ++x) {
      const float center = image.at(x, y);
      unsigned code = 0;
      for (unsigned n = 0; n < 8; ++n) {
        const float neighbour = image.at(x + kLbpOffsets[n][0], y + kLbpOffsets[n][1]);
        if (neighbour - center > 0.0f) code |= 1u << n;
      }
      map.codes[(y - 1) * map.width + (x - 1)] = static_cast<std::uint8_t>(code);
    }
  }
  return map;
}

std::vector<std::uint64_t> lbp_counts(const LbpCodeMap& codes) {
  std::vector<std::uint64_t> counts(256, 0);
  for (std::uint8_t c : codes.codes) ++counts[c];
  return counts;
}

FeatureVector lbp_histogram(const LbpCodeMap& codes) {
  if (codes.codes.empty()) throw DimensionError("LBP histogram of an empty code map");
  const auto counts = lbp_counts(codes);
  const double total = static_cast<double>(codes.codes.size());
  std::vector<float> out(kLbpLength);
  for (std::size_t i = 0; i < kLbpLength; ++i) out[i] = static_cast<float>(static_cast<double>(counts[i]) / total);
  return FeatureVector(FeatureTag::lbp, std::move(out));
}

}  // namespace fusion_mammo::features
