#include "fusion_mammo/pipeline/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/pipeline/image_io.hpp"
#include "fusion_mammo/util/parallel.hpp"
#include "fusion_mammo/util/rng.hpp"

namespace fusion_mammo::pipeline {
namespace {

constexpr std::size_t kSize = kImageSize;

void add_blob(std::vector<double>& img, double cx, double cy, double sigma, double amplitude) {
  const double reach = 4.0 * sigma;
  const auto x0 = static_cast<std::ptrdiff_t>(std::max(0.0, std::floor(cx - reach)));
  const auto x1 = static_cast<std::ptrdiff_t>(std::min(kSize - 1.0, std::ceil(cx + reach)));
  const auto y0 = static_cast<std::ptrdiff_t>(std::max(0.0, std::floor(cy - reach)));
  const auto y1 = static_cast<std::ptrdiff_t>(std::min(kSize - 1.0, std::ceil(cy + reach)));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::ptrdiff_t y = y0; y <= y1; ++y) {
    for (std::ptrdiff_t x = x0; x <= x1; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      img[static_cast<std::size_t>(y) * kSize + static_cast<std::size_t>(x)] += amplitude * std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
}

}  // namespace

GrayImage render_synthetic_image(int label, std::uint64_t seed) {
  if (label != 0 && label != 1) throw ArgumentError("synthetic label must be 0 or 1");
  Rng rng(seed);
  std::vector<double> img(kSize * kSize, rng.uniform(0.25, 0.40));
  for (int i = 0; i < 3; ++i) {
    add_blob(img, rng.uniform(0, kSize), rng.uniform(0, kSize), rng.uniform(40, 80), rng.uniform(0.08, 0.18));
  }
  if (label == 0) {
    const auto masses = 3 + rng.below(4);
    for (std::uint64_t i = 0; i < masses; ++i) {
      add_blob(img, rng.uniform(30, kSize - 30.0), rng.uniform(30, kSize - 30.0), rng.uniform(12, 20),
               rng.uniform(0.12, 0.22));
    }
  } else {
    const auto spots = 40 + rng.below(31);
    for (std::uint64_t i = 0; i < spots; ++i) {
      add_blob(img, rng.uniform(10, kSize - 10.0), rng.uniform(10, kSize - 10.0), rng.uniform(1.5, 3.0),
               rng.uniform(0.25, 0.45));
    }
  }
  std::vector<float> pixels(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    pixels[i] = static_cast<float>(std::clamp(img[i] + 0.02 * rng.normal(), 0.0, 1.0));
  }
  return GrayImage(kSize, kSize, std::move(pixels));
}

DatasetManifest synth_dataset(std::size_t n, std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (n < 20 || n % 2 != 0) {
    throw ArgumentError("synth_dataset: n must be an even number >= 20 (got " + std::to_string(n) + ")");
  }
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i < n / 2 ? 0 : 1;
  Rng order(mix_seed(seed, 0xA11CE));
  order.shuffle(std::span(labels));

  DatasetManifest manifest;
  manifest.image_root = "images";
  manifest.base_dir = out_dir;
  manifest.records.resize(n);
  std::filesystem::create_directories(out_dir / "images");
  parallel_for(n, [&](std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%05zu.png", i);
    char patient[32];
    std::snprintf(patient, sizeof(patient), "SYN_%05zu", i);
    ManifestRecord& r = manifest.records[i];
    r.image_id = name;
    r.image_path = name;
    r.patient_id = patient;
    r.view = i % 2 == 0 ? View::cc : View::mlo;
    r.laterality = (i / 2) % 2 == 0 ? Laterality::left : Laterality::right;
    r.label = labels[i];
    write_png(out_dir / "images" / name, render_synthetic_image(labels[i], mix_seed(seed, i)));
  });
  manifest.notes.push_back("synthetic dataset, n " + std::to_string(n) + ", seed " + std::to_string(seed));
  assign_split(manifest, seed, 0.2, SplitPolicy::stratified);
  return manifest;
}

}  // namespace fusion_mammo::pipeline
