#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fusion_mammo/features/feature_vector.hpp"
#include "fusion_mammo/features/gray_image.hpp"

namespace fusion_mammo::features {

// HOG geometry: a 255x255 image is edge-padded to 256x256 and split into a
// 16x16 grid of 16x16-pixel cells, 9 unsigned orientation bins per cell.
inline constexpr std::size_t kHogImageSize = 255;
inline constexpr std::size_t kHogPaddedSize = 256;
inline constexpr std::size_t kHogCellPixels = 16;
inline constexpr std::size_t kHogCellsPerSide = kHogPaddedSize / kHogCellPixels;
inline constexpr std::size_t kHogBins = 9;
inline constexpr double kHogBinWidthDegrees = 180.0 / kHogBins;

/// Bin b is centred on b*20 degrees; votes are split linearly between the two
/// nearest centres, wrapping 180 -> 0. Returns the two (bin, weight) pairs.
struct BinVote {
  std::size_t lower_bin;
  double lower_weight;
  std::size_t upper_bin;
  double upper_weight;
};
BinVote hog_bin_vote(double angle_degrees);

/// 2304 values ordered cell-row, cell-column, bin. Each cell histogram is
/// L2-normalised; cells without gradient stay zero.
FeatureVector compute_hog(const GrayImage& image);

/// Interior LBP codes, (width-2) x (height-2), row-major.
struct LbpCodeMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> codes;

  std::uint8_t at(std::size_t x, std::size_t y) const { return codes[y * width + x]; }
};

/// Neighbour offsets in bit order: clockwise from the top-left neighbour.
inline constexpr int kLbpOffsets[8][2] = {{-1, -1}, {0, -1}, {1, -1}, {1, 0},
                                          {1, 1},   {0, 1},  {-1, 1}, {-1, 0}};

/// 8-neighbour, radius-1 LBP with a strict threshold: bit n is set iff
/// neighbour n is brighter than the centre.
LbpCodeMap compute_lbp_codes(const GrayImage& image);

/// Raw counts per code (sums to the number of interior pixels).
std::vector<std::uint64_t> lbp_counts(const LbpCodeMap& codes);
/// 256-bin histogram of relative frequencies.
FeatureVector lbp_histogram(const LbpCodeMap& codes);

}  // namespace fusion_mammo::features
