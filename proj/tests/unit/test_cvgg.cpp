#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fusion_mammo/cvgg/network.hpp"
#include "fusion_mammo/error.hpp"
#include "support/fixtures.hpp"

using namespace fusion_mammo;
using namespace fusion_mammo::cvgg;

namespace {

/// Two classes that differ in mean brightness; linearly separable.
std::vector<LabeledImage> toy_set(const Profile& p, std::size_t n, std::uint64_t seed) {
  std::vector<LabeledImage> out;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    Tensor img({p.input_height, p.input_width, p.input_channels});
    for (float& v : img.data()) v = static_cast<float>((label ? 0.7 : 0.3) + rng.uniform(-0.15, 0.15));
    out.push_back({std::move(img), label});
  }
  return out;
}

Tensor stack(const std::vector<LabeledImage>& set, std::size_t count) {
  const Shape& s = set[0].image.shape();
  Tensor batch({count, s[0], s[1], s[2]});
  for (std::size_t i = 0; i < count; ++i) {
    std::copy(set[i].image.data().begin(), set[i].image.data().end(), batch.data().begin() + i * set[i].image.size());
  }
  return batch;
}

}  // namespace

TEST_SUITE("cvgg") {

TEST_CASE("canonical build reproduces every reference layer row") {
  const auto net = CvggNetwork::build(canonical_profile(), 2, 1);
  const auto& table = canonical_layer_table();
  REQUIRE(net.layers().size() == 12);
  REQUIRE(table.size() == 12);
  const std::size_t expected_params[] = {1792, 36928, 0, 73856, 147584, 0, 147584, 147584, 0, 0, 25690368, 514};
  const Shape expected_shapes[] = {{253, 253, 64}, {251, 251, 64}, {125, 125, 64}, {123, 123, 128},
                                   {121, 121, 128}, {60, 60, 128},  {58, 58, 128},  {56, 56, 128},
                                   {28, 28, 128},  {100352},        {256},          {2}};
  for (std::size_t i = 0; i < 12; ++i) {
    CAPTURE(table[i].name);
    CHECK(net.layers()[i].name == table[i].name);
    CHECK(net.layers()[i].output_shape == expected_shapes[i]);
    CHECK(net.layers()[i].parameter_count == expected_params[i]);
    CHECK(table[i].output_shape == expected_shapes[i]);
    CHECK(table[i].parameter_count == expected_params[i]);
  }
  CHECK(net.parameter_count() == 26'246'210);
  CHECK(net.trainable_layer_count() == 8);
  CHECK(net.layers().back().activation == Activation::softmax);
  CHECK(net.input_shape() == Shape{255, 255, 3});
}

TEST_CASE("layer names follow the reference order") {
  const char* names[] = {"Conv1a", "Conv1b", "MaxPool1", "Conv2a", "Conv2b", "MaxPool2",
                         "Conv3a", "Conv3b", "MaxPool3", "Flatten", "Dense4", "DenseOut"};
  const auto& table = canonical_layer_table();
  for (std::size_t i = 0; i < 12; ++i) CHECK(std::string(table[i].name) == names[i]);
}

TEST_CASE("canonical geometry is enforced") {
  Profile bad = canonical_profile();
  bad.input_height = 256;
  CHECK_THROWS_AS(CvggNetwork::build(bad), ConstructionError);
  Profile narrow = canonical_profile();
  narrow.block_filters[1] = 96;
  try {
    CvggNetwork::build(narrow);
    FAIL("expected ConstructionError");
  } catch (const ConstructionError& e) {
    CHECK(std::string(e.what()).find("Conv2a") != std::string::npos);
  }
  CHECK_THROWS_AS(CvggNetwork::build(reduced_profile(), 3), ConstructionError);
  CHECK_THROWS_AS(profile_by_name("huge"), ArgumentError);
}

TEST_CASE("reduced profile keeps the 256-unit feature layer") {
  const auto net = CvggNetwork::build(reduced_profile(), 2, 3);
  CHECK_FALSE(net.profile().canonical);
  CHECK(net.layers().size() == 12);
  CHECK(net.layers()[10].output_shape == Shape{256});
  CHECK(net.parameter_count() == 75'242);
}

TEST_CASE("forward rows are distributions and batch members are independent") {
  const auto net = CvggNetwork::build(reduced_profile(), 2, 5);
  const auto set = toy_set(net.profile(), 4, 9);
  const Tensor batch = stack(set, 4);
  const Tensor probs = net.forward(batch);
  REQUIRE(probs.shape() == Shape{4, 2});
  for (std::size_t r = 0; r < 4; ++r) CHECK(std::abs(probs[2 * r] + probs[2 * r + 1] - 1.0) <= 1e-6);
  for (std::size_t r = 0; r < 4; ++r) {
    const Tensor single = net.forward(set[r].image);
    CHECK(std::abs(single[0] - probs[2 * r]) <= 1e-5);
    CHECK(std::abs(single[1] - probs[2 * r + 1]) <= 1e-5);
  }
  CHECK_THROWS_AS(net.forward(Tensor({1, 32, 32, 3})), DimensionError);
}

TEST_CASE("same seed gives bit-identical parameters and outputs") {
  const auto a = CvggNetwork::build(reduced_profile(), 2, 77);
  const auto b = CvggNetwork::build(reduced_profile(), 2, 77);
  const auto c = CvggNetwork::build(reduced_profile(), 2, 78);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint() != c.fingerprint());
  const Tensor x = testing::random_tensor({64, 64, 3}, 4, 0.0, 1.0);
  const Tensor pa = a.forward(x), pb = b.forward(x);
  CHECK(std::equal(pa.data().begin(), pa.data().end(), pb.data().begin()));
}

TEST_CASE("dense features are 256 non-negative values and repeatable") {
  const auto net = CvggNetwork::build(reduced_profile(), 2, 13);
  const Tensor x = testing::random_tensor({64, 64, 3}, 14, 0.0, 1.0);
  const FeatureVector f = net.extract_dense_features(x);
  CHECK(f.tag() == FeatureTag::deep);
  CHECK(f.size() == 256);
  for (float v : f.values()) CHECK(v >= 0.0f);
  CHECK(f == net.extract_dense_features(x));
  CHECK_THROWS_AS(net.extract_dense_features(Tensor({1, 64, 64, 3})), DimensionError);
}

TEST_CASE("training fits a separable toy set") {
  auto net = CvggNetwork::build(reduced_profile(), 2, 21);
  const auto set = toy_set(net.profile(), 32, 22);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 8;
  cfg.seed = 23;
  const auto history = train(net, set, cfg);
  REQUIRE(history.size() == 20);
  CHECK(history.back() < history.front());
  CHECK(history.back() <= 0.5 * history.front());
}

TEST_CASE("training loss halves within 50 epochs") {
  auto net = CvggNetwork::build(reduced_profile(), 2, 31);
  const auto set = toy_set(net.profile(), 32, 32);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 33;
  const auto history = train(net, set, cfg);
  CHECK(*std::min_element(history.begin(), history.end()) <= 0.5 * history.front());
}

TEST_CASE("zero learning rate keeps the loss constant") {
  auto net = CvggNetwork::build(reduced_profile(), 2, 41);
  const auto before = net.fingerprint();
  const auto set = toy_set(net.profile(), 16, 42);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 43;
  cfg.adam.learning_rate = 0.0f;
  const auto history = train(net, set, cfg);
  for (double l : history) CHECK(l == doctest::Approx(history.front()).epsilon(1e-6));
  CHECK(net.fingerprint() == before);
}

TEST_CASE("identical seeds give identical loss histories") {
  const auto set = toy_set(reduced_profile(), 16, 52);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 53;
  auto a = CvggNetwork::build(reduced_profile(), 2, 51);
  auto b = CvggNetwork::build(reduced_profile(), 2, 51);
  CHECK(train(a, set, cfg) == train(b, set, cfg));
  CHECK(a.fingerprint() == b.fingerprint());
}

TEST_CASE("training rejects a single-class set and bad configs") {
  auto net = CvggNetwork::build(reduced_profile(), 2, 61);
  auto set = toy_set(net.profile(), 8, 62);
  for (auto& s : set) s.label = 1;
  CHECK_THROWS_AS(train(net, set, {}), ArgumentError);
  CHECK_THROWS_AS(train(net, std::span<const LabeledImage>{}, {}), ArgumentError);
  TrainConfig zero;
  zero.epochs = 0;
  CHECK_THROWS_AS(train(net, toy_set(net.profile(), 8, 63), zero), ArgumentError);
}

TEST_CASE("streaming trainer matches the in-memory trainer") {
  const auto set = toy_set(reduced_profile(), 16, 72);
  std::vector<std::size_t> labels;
  for (const auto& s : set) labels.push_back(s.label);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 73;
  auto a = CvggNetwork::build(reduced_profile(), 2, 71);
  auto b = CvggNetwork::build(reduced_profile(), 2, 71);
  const auto ha = train(a, set, cfg);
  const auto hb = train(b, labels, [&](std::size_t i) { return set[i].image; }, cfg);
  CHECK(ha == hb);
  CHECK(a.fingerprint() == b.fingerprint());
}

}  // TEST_SUITE
