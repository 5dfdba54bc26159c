#include "fusion_mammo/ml/knn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/io/binary.hpp"
#include "fusion_mammo/simd/kernels.hpp"

namespace fusion_mammo::ml {

std::array<double, 2> weighted_vote(std::span<const Neighbor> neighbors, std::span<const std::uint8_t> labels,
                                    KnnWeighting weighting) {
  if (neighbors.empty()) throw ArgumentError("weighted_vote: no neighbours");
  const bool exact_match = std::any_of(neighbors.begin(), neighbors.end(), [](const Neighbor& n) { return n.distance == 0.0; });
  std::array<double, 2> votes{0.0, 0.0};
  double total = 0.0;
  for (const Neighbor& n : neighbors) {
    double w = 1.0;
    if (weighting == KnnWeighting::inverse_distance) {
      w = exact_match ? (n.distance == 0.0 ? 1.0 : 0.0) : 1.0 / n.distance;
    }
    votes[labels[n.index]] += w;
    total += w;
  }
  return {votes[0] / total, votes[1] / total};
}

KnnModel KnnModel::fit(const LabeledMatrix& train, KnnConfig config) {
  if (config.k == 0) throw ArgumentError("knn: k must be positive");
  if (config.k > train.rows()) {
    throw ArgumentError("knn: k = " + std::to_string(config.k) + " exceeds training size " +
                        std::to_string(train.rows()));
  }
  train.require_finite();
  KnnModel model;
  model.config_ = config;
  if (config.standardize && train.rows() >= 2) {
    model.stats_ = standardize_fit(train);
    model.train_ = standardize_apply(*model.stats_, train);
  } else {
    model.train_ = train;
  }
  return model;
}

std::vector<Neighbor> KnnModel::nearest(std::span<const float> x) const {
  if (x.size() != train_.cols()) {
    throw DimensionError("knn: query of length " + std::to_string(x.size()) + ", model has " +
                         std::to_string(train_.cols()));
  }
  std::vector<float> scaled;
  if (stats_) {
    scaled = standardize_apply(*stats_, x);
    x = scaled;
  }
  std::vector<std::pair<double, std::size_t>> all(train_.rows());
  for (std::size_t i = 0; i < train_.rows(); ++i) all[i] = {simd::squared_distance(x, train_.row(i)), i};
  const std::size_t k = config_.k;
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  std::vector<Neighbor> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = {all[i].second, std::sqrt(all[i].first)};
  return out;
}

std::array<double, 2> KnnModel::predict_proba(std::span<const float> x) const {
  const auto neighbors = nearest(x);
  return weighted_vote(neighbors, train_.labels(), config_.weighting);
}

Prediction KnnModel::predict(std::span<const float> x) const {
  const auto p = predict_proba(x);
  return {p[1] >= 0.5 ? 1 : 0, p[1]};
}

namespace {
constexpr const char* kKnnMagic = "KNNM";
constexpr std::uint16_t kKnnVersion = 1;
}  // namespace

std::vector<std::byte> KnnModel::serialize() const {
  io::ByteWriter out;
  out.put_magic(kKnnMagic);
  out.put(kKnnVersion);
  out.put(static_cast<std::uint32_t>(config_.k));
  out.put(static_cast<std::uint8_t>(config_.weighting));
  out.put(static_cast<std::uint8_t>(stats_.has_value()));
  out.put(static_cast<std::uint32_t>(train_.cols()));
  out.put(static_cast<std::uint32_t>(train_.rows()));
  if (stats_) {
    for (double v : stats_->mean) out.put(v);
    for (double v : stats_->stddev) out.put(v);
  }
  out.put_floats(train_.values());
  for (auto l : train_.labels()) out.put(l);
  return out.release();
}

KnnModel KnnModel::deserialize(std::span<const std::byte> bytes) {
  io::ByteReader in(bytes, "knn model");
  in.expect_magic(kKnnMagic);
  if (const auto v = in.get<std::uint16_t>(); v != kKnnVersion) in.fail("unsupported version " + std::to_string(v));
  KnnModel model;
  model.config_.k = in.get<std::uint32_t>();
  const auto weighting = in.get<std::uint8_t>();
  if (weighting > 1) in.fail("unknown weighting " + std::to_string(weighting));
  model.config_.weighting = static_cast<KnnWeighting>(weighting);
  const bool has_stats = in.get<std::uint8_t>() != 0;
  model.config_.standardize = has_stats;
  const std::size_t cols = in.get<std::uint32_t>();
  const std::size_t rows = in.get<std::uint32_t>();
  if (model.config_.k == 0 || model.config_.k > rows) in.fail("k inconsistent with stored rows");
  if (has_stats) {
    StandardizationStats stats;
    stats.mean.resize(cols);
    stats.stddev.resize(cols);
    for (double& v : stats.mean) v = in.get<double>();
    for (double& v : stats.stddev) v = in.get<double>();
    model.stats_ = std::move(stats);
  }
  if (rows * cols * sizeof(float) > in.remaining()) in.fail("truncated training rows");
  std::vector<float> values(rows * cols);
  in.get_floats(values);
  std::vector<std::uint8_t> labels(rows);
  for (auto& l : labels) {
    l = in.get<std::uint8_t>();
    if (l > 1) in.fail("label outside {0,1}");
  }
  in.expect_end();
  model.train_ = LabeledMatrix(cols, std::move(values), std::move(labels));
  return model;
}

}  // namespace fusion_mammo::ml
