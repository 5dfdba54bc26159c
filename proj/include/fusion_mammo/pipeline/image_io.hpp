#pragma once

#include <cstddef>
#include <filesystem>

#include "fusion_mammo/cvgg/network.hpp"
#include "fusion_mammo/features/gray_image.hpp"
#include "fusion_mammo/tensor/tensor.hpp"

namespace fusion_mammo::pipeline {

inline constexpr std::size_t kImageSize = 255;

/// Decodes a PNG at its native size. Palette, colour and sub-byte images are
/// converted to grey; samples are divided by the maximum of their bit depth.
/// Throws DataError naming the path on a missing or corrupt file.
GrayImage read_png(const std::filesystem::path& path);

/// Reads only the header; false when the file is not a decodable PNG.
bool png_header_readable(const std::filesystem::path& path);

/// bit_depth 8 or 16; values are rounded to the nearest level.
void write_png(const std::filesystem::path& path, const GrayImage& image, int bit_depth = 8);

/// Bilinear resize with half-pixel centres and edge clamping. Same-size
/// input is returned unchanged.
GrayImage resize_bilinear(const GrayImage& image, std::size_t width, std::size_t height);

/// (H,W,3) tensor with the grey plane replicated into every channel.
Tensor to_rgb_tensor(const GrayImage& image);

struct PreprocessedImage {
  GrayImage gray;  // 255x255, descriptor input
  Tensor rgb;      // 255x255x3, canonical network input
};

PreprocessedImage load_and_preprocess(const std::filesystem::path& path);

/// Network input for a profile: the 255x255 grey image, resized to the
/// profile geometry when it differs, replicated to 3 channels.
Tensor network_input(const GrayImage& gray255, const cvgg::Profile& profile);

}  // namespace fusion_mammo::pipeline
