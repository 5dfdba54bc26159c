#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "fusion_mammo/features/gray_image.hpp"
#include "fusion_mammo/pipeline/manifest.hpp"

namespace fusion_mammo::pipeline {

/// One 255x255 synthetic image. Both classes share a smooth background with
/// noise; benign images add a few large soft masses, malignant ones many
/// small bright spots. Fully determined by (label, seed).
GrayImage render_synthetic_image(int label, std::uint64_t seed);

/// Writes n 8-bit PNGs under out_dir/images and returns their manifest
/// (relative image root, seeded stratified 80/20 split). Exactly n/2 images
/// per class. ArgumentError unless n >= 20 and even.
DatasetManifest synth_dataset(std::size_t n, std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace fusion_mammo::pipeline
