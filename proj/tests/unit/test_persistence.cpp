#include <doctest.h>

#include "fusion_mammo/cvgg/network.hpp"
#include "fusion_mammo/error.hpp"
#include "fusion_mammo/ml/knn.hpp"
#include "fusion_mammo/ml/trees.hpp"
#include "fusion_mammo/pipeline/experiment.hpp"
#include "support/fixtures.hpp"

using namespace fusion_mammo;
using namespace fusion_mammo::ml;

namespace {

LabeledMatrix sample_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  LabeledMatrix m(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<float> row(cols);
    const int label = static_cast<int>(r % 2);
    for (float& v : row) v = static_cast<float>(rng.normal() + label);
    m.add_row(row, label);
  }
  return m;
}

template <class F>
void expect_format_error_on_damage(const std::vector<std::byte>& good, F decode) {
  auto bad_magic = good;
  bad_magic[0] = std::byte{'X'};
  CHECK_THROWS_AS(decode(bad_magic), FormatError);
  for (std::size_t cut : {std::size_t{3}, good.size() / 2, good.size() - 1}) {
    const std::vector<std::byte> truncated(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(decode(truncated), FormatError);
  }
  auto longer = good;
  longer.push_back(std::byte{0});
  CHECK_THROWS_AS(decode(longer), FormatError);
}

}  // namespace

TEST_SUITE("persistence") {

TEST_CASE("network round trip is bit-exact") {
  const auto net = cvgg::CvggNetwork::build(cvgg::reduced_profile(), 2, 5);
  const auto bytes = cvgg::serialize_network(net);
  const auto back = cvgg::deserialize_network(bytes);
  CHECK(back.fingerprint() == net.fingerprint());
  CHECK(cvgg::serialize_network(back) == bytes);
  const Tensor x = testing::random_tensor({64, 64, 3}, 6, 0.0, 1.0);
  const Tensor a = net.forward(x), b = back.forward(x);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  expect_format_error_on_damage(bytes, [](const std::vector<std::byte>& v) { return cvgg::deserialize_network(v); });
}

TEST_CASE("network files") {
  testing::TempDir dir("net");
  const auto net = cvgg::CvggNetwork::build(cvgg::reduced_profile(), 2, 7);
  cvgg::save_network(net, dir / "m.model");
  CHECK(cvgg::load_network(dir / "m.model").fingerprint() == net.fingerprint());
  CHECK_THROWS_AS(cvgg::load_network(dir / "absent.model"), StateError);
}

TEST_CASE("forest and boosted ensembles round trip") {
  const auto m = sample_matrix(80, 4, 8);
  ForestConfig fc;
  fc.trees = 5;
  fc.seed = 9;
  BoostConfig bc;
  bc.rounds = 7;
  for (const TreeEnsemble& e : {forest_fit(m, fc), xgb_fit(m, bc)}) {
    const auto bytes = serialize_ensemble(e);
    const auto back = deserialize_ensemble(bytes);
    CHECK(back == e);
    CHECK(serialize_ensemble(back) == bytes);
    expect_format_error_on_damage(bytes, [](const std::vector<std::byte>& v) { return deserialize_ensemble(v); });
  }
}

TEST_CASE("corrupted tree structure is rejected") {
  const auto m = sample_matrix(40, 2, 10);
  BoostConfig bc;
  bc.rounds = 1;
  bc.max_depth = 2;
  auto e = xgb_fit(m, bc);
  REQUIRE(e.trees[0].nodes.size() > 1);
  e.trees[0].nodes[0].left = 0;  // cycle
  CHECK_THROWS_AS(deserialize_ensemble(serialize_ensemble(e)), FormatError);
}

TEST_CASE("knn model round trips") {
  const auto m = sample_matrix(30, 3, 11);
  for (bool standardize : {true, false}) {
    const auto model = KnnModel::fit(m, {4, KnnWeighting::inverse_distance, standardize});
    const auto bytes = model.serialize();
    const auto back = KnnModel::deserialize(bytes);
    CHECK(back.serialize() == bytes);
    for (std::size_t r = 0; r < m.rows(); ++r) CHECK(back.predict_proba(m.row(r)) == model.predict_proba(m.row(r)));
    expect_format_error_on_damage(bytes, [](const std::vector<std::byte>& v) { return KnnModel::deserialize(v); });
  }
}

TEST_CASE("classifier wrapper round trips for every kind") {
  const auto m = sample_matrix(60, kDeepLength, 12);
  pipeline::RunConfig cfg;
  cfg.forest.trees = 4;
  cfg.boost.rounds = 4;
  for (auto kind : {pipeline::ClassifierKind::knn, pipeline::ClassifierKind::rf, pipeline::ClassifierKind::xgb}) {
    auto clf = pipeline::Classifier::fit(kind, pipeline::FeatureSet::deep, m, cfg);
    clf.network_fingerprint = 0xABCDEFull;
    const auto bytes = clf.serialize();
    const auto back = pipeline::Classifier::deserialize(bytes);
    CHECK(back.kind() == kind);
    CHECK(back.feature_set() == pipeline::FeatureSet::deep);
    CHECK(back.network_fingerprint == 0xABCDEFull);
    CHECK(back.serialize() == bytes);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      CHECK(back.predict(m.row(r)).probability == clf.predict(m.row(r)).probability);
    }
    expect_format_error_on_damage(bytes,
                                  [](const std::vector<std::byte>& v) { return pipeline::Classifier::deserialize(v); });
  }
  testing::TempDir dir("clf");
  try {
    pipeline::Classifier::load(dir / "classifier.bin");
    FAIL("expected StateError");
  } catch (const StateError& e) {
    CHECK(std::string(e.what()).find("train-clf") != std::string::npos);
  }
}

}  // TEST_SUITE
