#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/features/descriptors.hpp"
#include "support/fixtures.hpp"

using namespace fusion_mammo;
using namespace fusion_mammo::features;

namespace {

constexpr std::size_t N = kHogImageSize;

/// Random image on the 256 8-bit levels (level / 255).
std::vector<std::uint8_t> random_levels(std::size_t w, std::size_t h, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> v(w * h);
  for (auto& x : v) x = static_cast<std::uint8_t>(rng.below(256));
  return v;
}

GrayImage from_levels(std::size_t w, std::size_t h, const std::vector<std::uint8_t>& levels,
                      const std::array<float, 256>& table) {
  std::vector<float> px(levels.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = table[levels[i]];
  return GrayImage(w, h, std::move(px));
}

/// f(x,y) = 0.5 + s * ((x - c) cos t + (y - c) sin t): one gradient direction t everywhere.
GrayImage ramp(double degrees) {
  const double t = degrees * std::numbers::pi / 180.0;
  const double s = 0.5 / 190.0, c = 127.0;
  std::vector<float> px(N * N);
  for (std::size_t y = 0; y < N; ++y)
    for (std::size_t x = 0; x < N; ++x)
      px[y * N + x] = static_cast<float>(0.5 + s * ((x - c) * std::cos(t) + (y - c) * std::sin(t)));
  return GrayImage(N, N, std::move(px));
}

/// Quarter turn: new(x, y) = old(y, N-1-x). A gradient at angle t turns into t + 90.
GrayImage rotate90(const GrayImage& img) {
  std::vector<float> px(N * N);
  for (std::size_t y = 0; y < N; ++y)
    for (std::size_t x = 0; x < N; ++x) px[y * N + x] = img.at(y, N - 1 - x);
  return GrayImage(N, N, std::move(px));
}

GrayImage rotate180(const GrayImage& img) {
  std::vector<float> px(N * N);
  for (std::size_t y = 0; y < N; ++y)
    for (std::size_t x = 0; x < N; ++x) px[y * N + x] = img.at(N - 1 - x, N - 1 - y);
  return GrayImage(N, N, std::move(px));
}

/// Orientation (degrees in [0,180)) encoded by a cell whose mass sits in two adjacent bins.
double decode_orientation(std::span<const float> cell) {
  std::size_t lower = 0;
  double best = -1.0;
  for (std::size_t b = 0; b < kHogBins; ++b) {
    const double pair = cell[b] + cell[(b + 1) % kHogBins];
    if (pair > best) {
      best = pair;
      lower = b;
    }
  }
  const double frac = cell[(lower + 1) % kHogBins] / best;
  return std::fmod((static_cast<double>(lower) + frac) * kHogBinWidthDegrees, 180.0);
}

double angular_gap(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 180.0);
  return std::min(d, 180.0 - d);
}

bool interior_cell(std::size_t cy, std::size_t cx) {
  return cy > 0 && cx > 0 && cy + 1 < kHogCellsPerSide && cx + 1 < kHogCellsPerSide;
}

}  // namespace

TEST_SUITE("descriptors") {

TEST_CASE("gray image validation") {
  CHECK_THROWS_AS(GrayImage(2, 2, std::vector<float>{0.0f, 0.5f, 1.5f, 0.0f}), DataError);
  CHECK_THROWS_AS(GrayImage(2, 2, std::vector<float>{0.0f, 0.5f, NAN, 0.0f}), DataError);
  CHECK_THROWS_AS(GrayImage(2, 2, std::vector<float>{0.0f}), DimensionError);
  const GrayImage img(2, 2, std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f});
  CHECK(img.clamped(-5, -5) == 0.1f);
  CHECK(img.clamped(9, 9) == 0.4f);
}

TEST_CASE("orientation votes split linearly between bin centres") {
  auto v = hog_bin_vote(0.0);
  CHECK(v.lower_bin == 0);
  CHECK(v.lower_weight == doctest::Approx(1.0));
  v = hog_bin_vote(10.0);
  CHECK(v.lower_bin == 0);
  CHECK(v.upper_bin == 1);
  CHECK(v.upper_weight == doctest::Approx(0.5));
  v = hog_bin_vote(170.0);
  CHECK(v.lower_bin == 8);
  CHECK(v.upper_bin == 0);
  CHECK(v.upper_weight == doctest::Approx(0.5));
  v = hog_bin_vote(-30.0);  // same line as 150
  CHECK(v.lower_bin == 7);
  CHECK(v.upper_weight == doctest::Approx(0.5));
  v = hog_bin_vote(180.0);
  CHECK(v.lower_bin == 0);
  CHECK(v.lower_weight == doctest::Approx(1.0));
}

TEST_CASE("HOG length is 2304 and rejects other sizes") {
  const GrayImage img(N, N, 0.3f);
  CHECK(compute_hog(img).size() == 2304);
  CHECK(kHogCellsPerSide * kHogCellsPerSide * kHogBins == 2304);
  CHECK_THROWS_AS(compute_hog(GrayImage(256, 256, 0.0f)), DimensionError);
  CHECK_THROWS_AS(compute_hog(GrayImage(255, 254, 0.0f)), DimensionError);
}

TEST_CASE("constant image gives an all-zero HOG") {
  for (float level : {0.0f, 0.42f, 1.0f}) {
    const auto h = compute_hog(GrayImage(N, N, level));
    CHECK(std::all_of(h.values().begin(), h.values().end(), [](float v) { return v == 0.0f; }));
  }
}

TEST_CASE("HOG cells are non-negative with unit or zero norm") {
  const auto levels = random_levels(N, N, 3);
  std::array<float, 256> table{};
  for (int i = 0; i < 256; ++i) table[i] = static_cast<float>(i) / 255.0f;
  GrayImage img = from_levels(N, N, levels, table);
  // Blank out one cell so the zero case is exercised.
  for (std::size_t y = 32; y < 48; ++y)
    for (std::size_t x = 32; x < 48; ++x) img.set(x, y, 0.5f);
  const auto h = compute_hog(img);
  std::size_t zero_cells = 0;
  for (std::size_t c = 0; c < 256; ++c) {
    double norm = 0.0;
    for (std::size_t b = 0; b < kHogBins; ++b) {
      const float v = h[c * kHogBins + b];
      CHECK(v >= 0.0f);
      norm += static_cast<double>(v) * v;
    }
    if (norm == 0.0) {
      ++zero_cells;
    } else {
      CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  // The blanked cell still sees its neighbours through the 1-pixel border,
  // so only a fully constant cell would be zero; random content has none.
  CHECK(zero_cells == 0);
}

TEST_CASE("vertical step edge puts at least 90% of the mass in the horizontal-gradient bin") {
  GrayImage img(N, N, 0.0f);
  for (std::size_t y = 0; y < N; ++y)
    for (std::size_t x = N / 2; x < N; ++x) img.set(x, y, 1.0f);
  const auto h = compute_hog(img);
  double total = 0.0, bin0 = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    total += h[i];
    if (i % kHogBins == 0) bin0 += h[i];
  }
  REQUIRE(total > 0.0);
  CHECK(bin0 / total >= 0.9);
}

TEST_CASE("HOG of a ramp encodes its gradient direction in every interior cell") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const double theta = rng.uniform(0.0, 180.0);
    const auto h = compute_hog(ramp(theta));
    for (std::size_t cy = 1; cy + 1 < kHogCellsPerSide; ++cy)
      for (std::size_t cx = 1; cx + 1 < kHogCellsPerSide; ++cx)
        CHECK(angular_gap(decode_orientation(h.values().subspan((cy * 16 + cx) * kHogBins, kHogBins)), theta) < 0.05);
  }
}

TEST_CASE("quarter turn rotates every interior cell orientation by 90 degrees") {
  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const double theta = rng.uniform(0.0, 180.0);
    const GrayImage img = ramp(theta);
    const auto a = compute_hog(img);
    const auto b = compute_hog(rotate90(img));
    for (std::size_t cy = 0; cy < kHogCellsPerSide; ++cy)
      for (std::size_t cx = 0; cx < kHogCellsPerSide; ++cx) {
        if (!interior_cell(cy, cx)) continue;
        // Cell (cy, cx) of the rotated image comes from cell (15-cx, cy) of
        // the original up to the one-pixel pad; all interior cells of a ramp agree anyway.
        const std::size_t sy = kHogCellsPerSide - 1 - cx, sx = cy;
        const double before = decode_orientation(a.values().subspan((sy * 16 + sx) * kHogBins, kHogBins));
        const double after = decode_orientation(b.values().subspan((cy * 16 + cx) * kHogBins, kHogBins));
        CHECK(angular_gap(after, before + 90.0) < 0.05);
      }
  }
}

TEST_CASE("half turn leaves unsigned interior cells unchanged") {
  const GrayImage img = ramp(33.0);
  const auto a = compute_hog(img);
  const auto b = compute_hog(rotate180(img));
  for (std::size_t cy = 1; cy + 1 < kHogCellsPerSide; ++cy)
    for (std::size_t cx = 1; cx + 1 < kHogCellsPerSide; ++cx)
      for (std::size_t bin = 0; bin < kHogBins; ++bin)
        CHECK(std::abs(a[(cy * 16 + cx) * 9 + bin] - b[((15 - cy) * 16 + (15 - cx)) * 9 + bin]) < 1e-4);
}

TEST_CASE("LBP hand example gives code 113") {
  // Neighbour values in bit order (clockwise from top-left), centre 0.5.
  const float ring[8] = {0.6f, 0.5f, 0.2f, 0.1f, 0.7f, 0.8f, 0.9f, 0.3f};
  GrayImage img(3, 3, 0.5f);
  for (int n = 0; n < 8; ++n) img.set(1 + kLbpOffsets[n][0], 1 + kLbpOffsets[n][1], ring[n]);
  const auto codes = compute_lbp_codes(img);
  REQUIRE(codes.codes.size() == 1);
  CHECK(codes.at(0, 0) == 113);
}

TEST_CASE("LBP of a dark centre with brighter neighbours is 255") {
  GrayImage img(3, 3, 0.4f);
  img.set(1, 1, 0.0f);
  CHECK(compute_lbp_codes(img).at(0, 0) == 255);
}

TEST_CASE("constant image gives code 0 everywhere and a unit spike in bin 0") {
  const auto codes = compute_lbp_codes(GrayImage(N, N, 0.7f));
  CHECK(std::all_of(codes.codes.begin(), codes.codes.end(), [](std::uint8_t c) { return c == 0; }));
  const auto h = lbp_histogram(codes);
  CHECK(h[0] == 1.0f);
  CHECK(std::all_of(h.values().begin() + 1, h.values().end(), [](float v) { return v == 0.0f; }));
}

TEST_CASE("LBP map covers the interior and counts 64009 codes on 255x255") {
  const auto levels = random_levels(N, N, 5);
  std::array<float, 256> table{};
  for (int i = 0; i < 256; ++i) table[i] = static_cast<float>(i) / 255.0f;
  const auto codes = compute_lbp_codes(from_levels(N, N, levels, table));
  CHECK(codes.width == 253);
  CHECK(codes.height == 253);
  const auto counts = lbp_counts(codes);
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  CHECK(total == 64009);
  const auto h = lbp_histogram(codes);
  CHECK(h.size() == 256);
  double sum = 0.0;
  for (float v : h.values()) sum += v;
  CHECK(std::abs(sum - 1.0) <= 1e-6);
  CHECK_THROWS_AS(compute_lbp_codes(GrayImage(2, 5, 0.0f)), DimensionError);
}

TEST_CASE("LBP codes survive strictly increasing intensity maps") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t w = 20 + rng.below(30), h = 20 + rng.below(30);
    const auto levels = random_levels(w, h, 100 + trial);
    std::array<float, 256> base{}, mapped{};
    for (int i = 0; i < 256; ++i) base[i] = static_cast<float>(i) / 255.0f;
    // Random strictly increasing table: sorted distinct draws.
    std::vector<float> draws;
    while (draws.size() < 256) {
      draws.push_back(static_cast<float>(rng.uniform()));
      std::sort(draws.begin(), draws.end());
      draws.erase(std::unique(draws.begin(), draws.end()), draws.end());
    }
    std::copy(draws.begin(), draws.end(), mapped.begin());
    CHECK(compute_lbp_codes(from_levels(w, h, levels, base)).codes ==
          compute_lbp_codes(from_levels(w, h, levels, mapped)).codes);
  }
}

TEST_CASE("LBP codes survive adding a constant") {
  const auto levels = random_levels(40, 30, 29);
  std::array<float, 256> low{}, shifted{};
  for (int i = 0; i < 256; ++i) {
    low[i] = static_cast<float>(i) / 512.0f;
    shifted[i] = low[i] + 0.25f;
  }
  CHECK(compute_lbp_codes(from_levels(40, 30, levels, low)).codes ==
        compute_lbp_codes(from_levels(40, 30, levels, shifted)).codes);
}

TEST_CASE("extractors are pure") {
  const auto levels = random_levels(N, N, 31);
  std::array<float, 256> table{};
  for (int i = 0; i < 256; ++i) table[i] = static_cast<float>(i) / 255.0f;
  const GrayImage img = from_levels(N, N, levels, table);
  CHECK(compute_hog(img) == compute_hog(img));
  CHECK(lbp_histogram(compute_lbp_codes(img)) == lbp_histogram(compute_lbp_codes(img)));
}

}  // TEST_SUITE
