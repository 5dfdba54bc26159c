#include "fusion_mammo/pipeline/experiment.hpp"

#include <chrono>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/io/binary.hpp"
#include "fusion_mammo/pipeline/fusion.hpp"
#include "fusion_mammo/util/hash.hpp"
#include "fusion_mammo/util/rng.hpp"

namespace fusion_mammo::pipeline {
namespace {

constexpr const char* kClassifierMagic = "CLSF";
constexpr std::uint16_t kClassifierVersion = 1;

std::size_t length_of(FeatureSet s) { return s == FeatureSet::deep ? kDeepLength : kFusedLength; }

}  // namespace

Classifier Classifier::fit(ClassifierKind kind, FeatureSet features, const ml::LabeledMatrix& train,
                           const RunConfig& cfg) {
  if (train.cols() != length_of(features)) {
    throw DimensionError("classifier input has " + std::to_string(train.cols()) + " columns, " +
                         std::string(to_string(features)) + " features have " +
                         std::to_string(length_of(features)));
  }
  Classifier c;
  c.kind_ = kind;
  c.features_ = features;
  switch (kind) {
    case ClassifierKind::knn:
      c.model_ = ml::KnnModel::fit(train, cfg.knn);
      break;
    case ClassifierKind::rf: {
      ml::ForestConfig forest = cfg.forest;
      forest.seed = mix_seed(cfg.seed, 0xF0BE57);
      c.model_ = ml::forest_fit(train, forest);
      break;
    }
    case ClassifierKind::xgb: {
      ml::BoostConfig boost = cfg.boost;
      boost.seed = mix_seed(cfg.seed, 0xB0057);
      c.model_ = ml::xgb_fit(train, boost);
      break;
    }
  }
  return c;
}

std::size_t Classifier::input_length() const { return length_of(features_); }

ml::Prediction Classifier::predict(std::span<const float> x) const {
  if (const auto* knn = std::get_if<ml::KnnModel>(&model_)) return knn->predict(x);
  const auto& trees = std::get<ml::TreeEnsemble>(model_);
  return trees.mode == ml::EnsembleMode::forest ? ml::forest_predict(trees, x) : ml::xgb_predict(trees, x);
}

std::vector<std::byte> Classifier::serialize() const {
  io::ByteWriter out;
  out.put_magic(kClassifierMagic);
  out.put(kClassifierVersion);
  out.put(static_cast<std::uint8_t>(kind_));
  out.put(static_cast<std::uint8_t>(features_));
  out.put(network_fingerprint);
  const auto payload = kind_ == ClassifierKind::knn ? std::get<ml::KnnModel>(model_).serialize()
                                                    : ml::serialize_ensemble(std::get<ml::TreeEnsemble>(model_));
  out.put(static_cast<std::uint64_t>(payload.size()));
  out.put_bytes(payload);
  return out.release();
}

Classifier Classifier::deserialize(std::span<const std::byte> bytes) {
  io::ByteReader in(bytes, "classifier");
  in.expect_magic(kClassifierMagic);
  if (const auto v = in.get<std::uint16_t>(); v != kClassifierVersion) {
    in.fail("unsupported version " + std::to_string(v));
  }
  Classifier c;
  const auto kind = in.get<std::uint8_t>();
  const auto features = in.get<std::uint8_t>();
  if (kind > 2 || features > 1) in.fail("unknown classifier kind or feature set");
  c.kind_ = static_cast<ClassifierKind>(kind);
  c.features_ = static_cast<FeatureSet>(features);
  c.network_fingerprint = in.get<std::uint64_t>();
  const auto size = in.get<std::uint64_t>();
  if (size > in.remaining()) in.fail("truncated payload");
  const auto payload = in.get_bytes(static_cast<std::size_t>(size));
  in.expect_end();
  if (c.kind_ == ClassifierKind::knn) {
    c.model_ = ml::KnnModel::deserialize(payload);
  } else {
    auto e = ml::deserialize_ensemble(payload);
    const auto want = c.kind_ == ClassifierKind::rf ? ml::EnsembleMode::forest : ml::EnsembleMode::boosted;
    if (e.mode != want) in.fail("ensemble mode does not match the classifier kind");
    c.model_ = std::move(e);
  }
  const std::size_t stored_cols = c.kind_ == ClassifierKind::knn
                                      ? std::get<ml::KnnModel>(c.model_).training().cols()
                                      : std::get<ml::TreeEnsemble>(c.model_).feature_count;
  if (stored_cols != c.input_length()) in.fail("model width does not match its feature set");
  return c;
}

void Classifier::save(const std::filesystem::path& path) const { io::write_file(path, serialize()); }

Classifier Classifier::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw StateError("no trained classifier at " + path.string() + "; run `train-clf` first");
  }
  return deserialize(io::read_file(path));
}

MatrixResult build_matrix(const DatasetManifest& manifest, const FeatureStore& store, Split split,
                          FeatureSet features, std::optional<std::uint64_t> expected_network) {
  MatrixResult out{ml::LabeledMatrix(length_of(features)), {}};
  std::size_t stale = 0;
  std::uint64_t stale_fp = 0;
  auto need = [&](const ManifestRecord& r, FeatureTag tag) {
    auto v = store.get(r.image_id, tag);
    if (!v) {
      throw StateError("feature store has no " + std::string(to_string(tag)) + " features for image " + r.image_id +
                       "; run `extract " + std::string(to_string(tag)) + "`");
    }
    return std::move(*v);
  };
  auto check_network = [&](const Provenance& p) {
    if (expected_network && p.network_fingerprint != *expected_network) {
      ++stale;
      stale_fp = p.network_fingerprint;
    }
  };
  for (std::size_t i : manifest.indices(split)) {
    const ManifestRecord& r = manifest.records[i];
    if (features == FeatureSet::deep) {
      const auto deep = need(r, FeatureTag::deep);
      check_network(deep.provenance);
      out.matrix.add_row(deep.vector.values(), r.label);
      continue;
    }
    if (auto fused = store.get(r.image_id, FeatureTag::fused)) {
      check_network(fused->provenance);
      out.matrix.add_row(fused->vector.values(), r.label);
      continue;
    }
    const auto deep = need(r, FeatureTag::deep);
    check_network(deep.provenance);
    const auto fused = fuse_features(deep.vector, need(r, FeatureTag::hog).vector, need(r, FeatureTag::lbp).vector);
    out.matrix.add_row(fused.values(), r.label);
  }
  if (stale > 0) {
    out.warnings.push_back(std::to_string(stale) + " " + std::string(to_string(split)) +
                           " feature vectors were extracted with network " + to_hex(stale_fp) +
                           " but the current network is " + to_hex(*expected_network) +
                           "; re-run `extract deep`");
  }
  return out;
}

EvalReport evaluate_classifier(const Classifier& clf, const DatasetManifest& manifest, const FeatureStore& store,
                               const RunConfig& cfg, std::optional<std::uint64_t> expected_network) {
  const auto start = std::chrono::steady_clock::now();
  auto test = build_matrix(manifest, store, Split::test, clf.feature_set(), expected_network);
  if (test.matrix.rows() == 0) throw StateError("the manifest has no test images");
  std::vector<int> predictions(test.matrix.rows()), labels(test.matrix.rows());
  for (std::size_t i = 0; i < test.matrix.rows(); ++i) {
    predictions[i] = clf.predict(test.matrix.row(i)).label;
    labels[i] = test.matrix.label(i);
  }
  EvalReport report = compute_metrics(predictions, labels);
  report.classifier = std::string(to_string(clf.kind()));
  report.feature_set = std::string(to_string(clf.feature_set()));
  report.feature_length = clf.input_length();
  report.train_size = manifest.count(Split::train);
  report.config_fingerprint = config_fingerprint(cfg);
  report.network_fingerprint = clf.network_fingerprint != 0 ? to_hex(clf.network_fingerprint) : "";
  report.warnings = std::move(test.warnings);
  if (expected_network && clf.network_fingerprint != 0 && clf.network_fingerprint != *expected_network) {
    report.warnings.push_back("classifier was trained on features of network " + to_hex(clf.network_fingerprint) +
                              ", current network is " + to_hex(*expected_network) + "; re-run `train-clf`");
  }
  report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

EvalReport run_experiment(const DatasetManifest& manifest, const FeatureStore& store, FeatureSet features,
                          ClassifierKind kind, const RunConfig& cfg, std::optional<std::uint64_t> expected_network) {
  const auto start = std::chrono::steady_clock::now();
  auto train = build_matrix(manifest, store, Split::train, features, expected_network);
  if (train.matrix.rows() == 0) throw StateError("the manifest has no training images");
  Classifier clf = Classifier::fit(kind, features, train.matrix, cfg);
  if (expected_network) clf.network_fingerprint = *expected_network;
  EvalReport report = evaluate_classifier(clf, manifest, store, cfg, expected_network);
  report.warnings.insert(report.warnings.begin(), train.warnings.begin(), train.warnings.end());
  report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace fusion_mammo::pipeline
