#include <doctest.h>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/pipeline/experiment.hpp"
#include "fusion_mammo/pipeline/feature_store.hpp"
#include "fusion_mammo/pipeline/fusion.hpp"
#include "support/fixtures.hpp"

using namespace fusion_mammo;
using namespace fusion_mammo::pipeline;

namespace {

FeatureVector random_vector(FeatureTag tag, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(expected_length(tag));
  for (float& x : v) x = static_cast<float>(rng.normal());
  return FeatureVector(tag, std::move(v));
}

DatasetManifest tiny_manifest(std::size_t n) {
  DatasetManifest m;
  for (std::size_t i = 0; i < n; ++i) {
    ManifestRecord r;
    r.image_id = "img" + std::to_string(i) + ".png";
    r.patient_id = "P" + std::to_string(i);
    r.image_path = r.image_id;
    r.label = static_cast<int>(i % 2);
    r.split = i < n - 2 ? Split::train : Split::test;
    m.records.push_back(r);
  }
  return m;
}

}  // namespace

TEST_SUITE("feature_store") {

TEST_CASE("vectors round trip bit-exactly across reopen") {
  testing::TempDir dir("fs");
  const auto deep = random_vector(FeatureTag::deep, 1);
  const auto hog = random_vector(FeatureTag::hog, 2);
  {
    auto store = FeatureStore::open_or_create(dir.path());
    CHECK(store.put("a.png", deep, {kDeepExtractorVersion, 42}));
    CHECK(store.put("a.png", hog, {kHogExtractorVersion, 0}));
  }
  const auto store = FeatureStore::open(dir.path());
  const auto got = store.get("a.png", FeatureTag::deep);
  REQUIRE(got);
  CHECK(got->vector == deep);
  CHECK(got->provenance == Provenance{kDeepExtractorVersion, 42});
  CHECK(store.get("a.png", FeatureTag::hog)->vector == hog);
  CHECK_FALSE(store.get("a.png", FeatureTag::lbp));
  CHECK_FALSE(store.get("b.png", FeatureTag::deep));
  CHECK(store.count(FeatureTag::deep) == 1);
}

TEST_CASE("identical puts write nothing; changed puts supersede") {
  testing::TempDir dir("fs");
  auto store = FeatureStore::open_or_create(dir.path());
  const auto v1 = random_vector(FeatureTag::lbp, 3), v2 = random_vector(FeatureTag::lbp, 4);
  CHECK(store.put("x", v1, {kLbpExtractorVersion, 0}));
  store.flush();
  const auto size = std::filesystem::file_size(FeatureStore::data_path(dir.path()));
  CHECK_FALSE(store.put("x", v1, {kLbpExtractorVersion, 0}));
  store.flush();
  CHECK(std::filesystem::file_size(FeatureStore::data_path(dir.path())) == size);
  CHECK(store.put("x", v2, {kLbpExtractorVersion, 0}));
  CHECK(store.get("x", FeatureTag::lbp)->vector == v2);
  CHECK(store.count(FeatureTag::lbp) == 1);
}

TEST_CASE("missing store, index and data are reported") {
  testing::TempDir dir("fs");
  CHECK_THROWS_AS(FeatureStore::open(dir / "none"), StateError);
  {
    auto store = FeatureStore::open_or_create(dir.path());
    store.put("x", random_vector(FeatureTag::lbp, 5), {kLbpExtractorVersion, 0});
  }
  std::filesystem::remove(FeatureStore::index_path(dir.path()));
  CHECK_THROWS_AS(FeatureStore::open(dir.path()), FormatError);
}

TEST_CASE("an index that disagrees with the data file is rejected") {
  testing::TempDir dir("fs");
  {
    auto store = FeatureStore::open_or_create(dir.path());
    store.put("x", random_vector(FeatureTag::lbp, 6), {kLbpExtractorVersion, 0});
  }
  auto data = testing::read_bytes(FeatureStore::data_path(dir.path()));
  data.resize(data.size() - 10);
  io::write_file(FeatureStore::data_path(dir.path()), data);
  CHECK_THROWS_AS(FeatureStore::open(dir.path()), FormatError);
}

TEST_CASE("fused rows are deep, hog, lbp regardless of insertion order") {
  testing::TempDir dir("fs");
  const auto manifest = tiny_manifest(6);
  auto store = FeatureStore::open_or_create(dir.path());
  std::vector<FeatureVector> expected;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& id = manifest.records[i].image_id;
    const auto deep = random_vector(FeatureTag::deep, 10 + i);
    const auto hog = random_vector(FeatureTag::hog, 20 + i);
    const auto lbp = random_vector(FeatureTag::lbp, 30 + i);
    // Reverse order of insertion on purpose.
    store.put(id, lbp, {kLbpExtractorVersion, 0});
    store.put(id, hog, {kHogExtractorVersion, 0});
    store.put(id, deep, {kDeepExtractorVersion, 9});
    expected.push_back(fuse_features(deep, hog, lbp));
  }
  const auto train = build_matrix(manifest, store, Split::train, FeatureSet::fused);
  REQUIRE(train.matrix.rows() == 4);
  for (std::size_t r = 0; r < 4; ++r) {
    const auto row = train.matrix.row(r);
    CHECK(std::equal(row.begin(), row.end(), expected[r].values().begin()));
  }
  CHECK(train.warnings.empty());
  const auto deep_only = build_matrix(manifest, store, Split::test, FeatureSet::deep);
  CHECK(deep_only.matrix.cols() == 256);
  CHECK(deep_only.matrix.rows() == 2);
}

TEST_CASE("vectors from another network produce a warning, absent ones a state error") {
  testing::TempDir dir("fs");
  const auto manifest = tiny_manifest(4);
  auto store = FeatureStore::open_or_create(dir.path());
  for (const auto& r : manifest.records) store.put(r.image_id, random_vector(FeatureTag::deep, 1), {kDeepExtractorVersion, 7});
  const auto same = build_matrix(manifest, store, Split::train, FeatureSet::deep, 7);
  CHECK(same.warnings.empty());
  const auto stale = build_matrix(manifest, store, Split::train, FeatureSet::deep, 8);
  REQUIRE(stale.warnings.size() == 1);
  CHECK(stale.warnings[0].find("extract deep") != std::string::npos);
  try {
    build_matrix(manifest, store, Split::train, FeatureSet::fused);
    FAIL("expected StateError");
  } catch (const StateError& e) {
    CHECK(std::string(e.what()).find("extract") != std::string::npos);
  }
}

}  // TEST_SUITE
