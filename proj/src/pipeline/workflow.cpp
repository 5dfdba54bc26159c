#include "fusion_mammo/pipeline/workflow.hpp"

#include <optional>

#include "fusion_mammo/cvgg/network.hpp"
#include "fusion_mammo/error.hpp"
#include "fusion_mammo/features/descriptors.hpp"
#include "fusion_mammo/io/binary.hpp"
#include "fusion_mammo/pipeline/experiment.hpp"
#include "fusion_mammo/pipeline/feature_store.hpp"
#include "fusion_mammo/pipeline/fusion.hpp"
#include "fusion_mammo/pipeline/image_io.hpp"
#include "fusion_mammo/pipeline/synth.hpp"
#include "fusion_mammo/util/hash.hpp"
#include "fusion_mammo/util/parallel.hpp"
#include "fusion_mammo/util/rng.hpp"

namespace fusion_mammo::pipeline {
namespace {

constexpr std::size_t kExtractChunk = 64;
// Network inputs are cached in memory below this size, streamed above it.
constexpr std::size_t kInputCacheBytes = std::size_t{512} << 20;

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

DatasetManifest require_manifest(const Workspace& ws) {
  if (!std::filesystem::exists(ws.manifest())) {
    throw StateError("no dataset manifest in " + ws.root.string() + "; run `ingest` or `synth` first");
  }
  return load_manifest(ws.manifest());
}

cvgg::CvggNetwork require_network(const Workspace& ws) {
  if (!std::filesystem::exists(ws.network())) {
    throw StateError("no trained network at " + ws.network().string() + "; run `train-cnn` first");
  }
  return cvgg::load_network(ws.network());
}

std::optional<std::uint64_t> current_network_fingerprint(const Workspace& ws) {
  if (!std::filesystem::exists(ws.network())) return std::nullopt;
  return cvgg::load_network(ws.network()).fingerprint();
}

std::string report_fingerprint(const RunConfig& cfg, const DatasetManifest& manifest) {
  return to_hex(Fnv1a{}.update(to_text(cfg)).update(to_hex(manifest.fingerprint())).digest());
}

}  // namespace

std::filesystem::path Workspace::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : root / p;
}

DatasetManifest stage_ingest(const Workspace& ws, const RunConfig& cfg, const Logger& log) {
  IngestOptions opt;
  for (const auto& p : cfg.csv_paths) opt.csv_paths.push_back(ws.resolve(p));
  if (opt.csv_paths.empty()) throw ArgumentError("ingest: no CSV files configured (dataset.csv or --csv)");
  opt.image_root = cfg.image_root.empty() ? opt.csv_paths.front().parent_path() : ws.resolve(cfg.image_root);
  opt.seed = cfg.seed;
  opt.test_fraction = cfg.test_fraction;
  opt.policy = cfg.split_policy;
  opt.use_published_split = cfg.published_split;
  DatasetManifest manifest = ingest_dataset(opt);
  say(log, "ingested " + std::to_string(manifest.records.size()) + " images");
  if (cfg.subset > 0 && cfg.subset < manifest.records.size()) {
    manifest = subsample(manifest, cfg.subset, cfg.seed);
    assign_split(manifest, cfg.seed, cfg.test_fraction, cfg.split_policy);
    say(log, "kept a subset of " + std::to_string(manifest.records.size()) + " images");
  }
  std::size_t malignant = 0;
  for (const auto& r : manifest.records) malignant += static_cast<std::size_t>(r.label);
  say(log, "benign " + std::to_string(manifest.records.size() - malignant) + ", malignant " +
               std::to_string(malignant) + "; train " + std::to_string(manifest.count(Split::train)) + " (" +
               std::to_string(manifest.fraction(Split::train)) + "), test " +
               std::to_string(manifest.count(Split::test)) + " (" + std::to_string(manifest.fraction(Split::test)) +
               ")");
  for (const auto& note : manifest.notes) say(log, note);
  save_manifest(manifest, ws.manifest());
  manifest.base_dir = ws.root;
  return manifest;
}

DatasetManifest stage_synth(const Workspace& ws, std::size_t n, std::uint64_t seed, const Logger& log) {
  DatasetManifest manifest = synth_dataset(n, seed, ws.root);
  save_manifest(manifest, ws.manifest());
  say(log, "generated " + std::to_string(n) + " synthetic images; train " +
               std::to_string(manifest.count(Split::train)) + ", test " + std::to_string(manifest.count(Split::test)));
  return manifest;
}

std::vector<double> stage_train_cnn(const Workspace& ws, const RunConfig& cfg, const Logger& log) {
  const DatasetManifest manifest = require_manifest(ws);
  const cvgg::Profile profile = cvgg::profile_by_name(cfg.profile);
  cvgg::CvggNetwork net = cvgg::CvggNetwork::build(profile, 2, mix_seed(cfg.seed, 1));
  const auto train_idx = manifest.indices(Split::train);
  if (train_idx.empty()) throw StateError("the manifest has no training images");

  std::vector<std::size_t> labels(train_idx.size());
  for (std::size_t i = 0; i < train_idx.size(); ++i) labels[i] = static_cast<std::size_t>(manifest.records[train_idx[i]].label);
  auto load = [&](std::size_t i) {
    const auto pre = load_and_preprocess(manifest.resolve(manifest.records[train_idx[i]]));
    return network_input(pre.gray, profile);
  };

  cvgg::TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = mix_seed(cfg.seed, 2);
  tc.adam.learning_rate = cfg.learning_rate;
  say(log, "training " + profile.name + " network (" + std::to_string(net.parameter_count()) + " parameters) on " +
               std::to_string(labels.size()) + " images for " + std::to_string(cfg.epochs) + " epochs");

  std::vector<double> history;
  const std::size_t input_bytes = shape_size(net.input_shape()) * sizeof(float) * labels.size();
  if (input_bytes <= kInputCacheBytes) {
    std::vector<Tensor> cache(labels.size());
    parallel_for(labels.size(), [&](std::size_t i) { cache[i] = load(i); });
    history = cvgg::train(net, labels, [&](std::size_t i) { return cache[i]; }, tc);
  } else {
    history = cvgg::train(net, labels, load, tc);
  }
  for (std::size_t e = 0; e < history.size(); ++e) {
    say(log, "epoch " + std::to_string(e + 1) + " mean loss " + std::to_string(history[e]));
  }
  cvgg::save_network(net, ws.network());
  return history;
}

std::size_t stage_extract(const Workspace& ws, const std::set<FeatureTag>& tags, const Logger& log) {
  if (tags.empty()) throw ArgumentError("extract: no descriptor selected");
  if (tags.contains(FeatureTag::fused)) throw ArgumentError("extract: fused vectors are produced by `fuse`");
  const DatasetManifest manifest = require_manifest(ws);
  std::optional<cvgg::CvggNetwork> net;
  if (tags.contains(FeatureTag::deep)) net = require_network(ws);
  const std::uint64_t net_fp = net ? net->fingerprint() : 0;
  FeatureStore store = FeatureStore::open_or_create(ws.features());

  struct Slot {
    std::optional<FeatureVector> deep, hog, lbp;
  };
  std::size_t written = 0;
  const std::size_t n = manifest.records.size();
  for (std::size_t start = 0; start < n; start += kExtractChunk) {
    const std::size_t count = std::min(kExtractChunk, n - start);
    std::vector<Slot> slots(count);
    parallel_for(count, [&](std::size_t k) {
      const auto pre = load_and_preprocess(manifest.resolve(manifest.records[start + k]));
      if (net) slots[k].deep = net->extract_dense_features(network_input(pre.gray, net->profile()));
      if (tags.contains(FeatureTag::hog)) slots[k].hog = features::compute_hog(pre.gray);
      if (tags.contains(FeatureTag::lbp)) slots[k].lbp = features::lbp_histogram(features::compute_lbp_codes(pre.gray));
    });
    for (std::size_t k = 0; k < count; ++k) {
      const std::string& id = manifest.records[start + k].image_id;
      if (slots[k].deep) written += store.put(id, *slots[k].deep, {kDeepExtractorVersion, net_fp});
      if (slots[k].hog) written += store.put(id, *slots[k].hog, {kHogExtractorVersion, 0});
      if (slots[k].lbp) written += store.put(id, *slots[k].lbp, {kLbpExtractorVersion, 0});
    }
    store.flush();
  }
  std::string names;
  for (FeatureTag t : tags) names += (names.empty() ? "" : ", ") + std::string(to_string(t));
  say(log, "extracted " + names + " for " + std::to_string(n) + " images (" + std::to_string(written) +
               " new records)");
  return written;
}

std::size_t stage_fuse(const Workspace& ws, const Logger& log) {
  const DatasetManifest manifest = require_manifest(ws);
  FeatureStore store = FeatureStore::open(ws.features());
  std::size_t written = 0;
  for (const auto& r : manifest.records) {
    std::optional<StoredFeature> parts[3];
    const FeatureTag tags[3] = {FeatureTag::deep, FeatureTag::hog, FeatureTag::lbp};
    for (int i = 0; i < 3; ++i) {
      parts[i] = store.get(r.image_id, tags[i]);
      if (!parts[i]) {
        throw StateError("cannot fuse image " + r.image_id + ": no " + std::string(to_string(tags[i])) +
                         " features; run `extract " + std::string(to_string(tags[i])) + "`");
      }
    }
    const FeatureVector fused = fuse_features(parts[0]->vector, parts[1]->vector, parts[2]->vector);
    written += store.put(r.image_id, fused, {kFusedExtractorVersion, parts[0]->provenance.network_fingerprint});
  }
  store.flush();
  say(log, "fused " + std::to_string(manifest.records.size()) + " images (" + std::to_string(written) +
               " new records)");
  return written;
}

void stage_train_clf(const Workspace& ws, const RunConfig& cfg, const Logger& log) {
  const DatasetManifest manifest = require_manifest(ws);
  const FeatureStore store = FeatureStore::open(ws.features());
  const auto expected = current_network_fingerprint(ws);
  auto train = build_matrix(manifest, store, Split::train, cfg.feature_set, expected);
  for (const auto& w : train.warnings) say(log, "warning: " + w);
  if (train.matrix.rows() == 0) throw StateError("the manifest has no training images");
  say(log, "training " + std::string(to_string(cfg.classifier)) + " on " + std::to_string(train.matrix.rows()) +
               " x " + std::to_string(train.matrix.cols()) + " " + std::string(to_string(cfg.feature_set)) +
               " features");
  Classifier clf = Classifier::fit(cfg.classifier, cfg.feature_set, train.matrix, cfg);
  clf.network_fingerprint = expected.value_or(0);
  clf.save(ws.classifier());
  io::write_text_file(ws.classifier_config(), to_text(cfg));
}

EvalReport stage_evaluate(const Workspace& ws, const Logger& log) {
  const Classifier clf = Classifier::load(ws.classifier());
  RunConfig cfg;
  if (std::filesystem::exists(ws.classifier_config())) cfg = load_run_config(ws.classifier_config());
  const DatasetManifest manifest = require_manifest(ws);
  const FeatureStore store = FeatureStore::open(ws.features());
  EvalReport report = evaluate_classifier(clf, manifest, store, cfg, current_network_fingerprint(ws));
  report.config_fingerprint = report_fingerprint(cfg, manifest);
  io::write_text_file(ws.report_json(), report_to_json(report));
  say(log, "accuracy " + std::to_string(report.accuracy) + " on " + std::to_string(report.test_size) +
               " test images");
  return report;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::json;
  if (name == "text") return ReportFormat::text;
  if (name == "svg") return ReportFormat::svg;
  throw ArgumentError("unknown report format \"" + std::string(name) + "\" (expected json, text or svg)");
}

std::string stage_report(const Workspace& ws, ReportFormat format) {
  if (!std::filesystem::exists(ws.report_json())) {
    throw StateError("no evaluation report at " + ws.report_json().string() + "; run `evaluate` first");
  }
  const std::string json = io::read_text_file(ws.report_json());
  const EvalReport report = report_from_json(json);
  switch (format) {
    case ReportFormat::json:
      return json;
    case ReportFormat::text: {
      std::string text = report_to_text(report);
      io::write_text_file(ws.report_text(), text);
      return text;
    }
    case ReportFormat::svg: {
      std::string svg = report_to_svg(report);
      io::write_text_file(ws.report_svg(), svg);
      return svg;
    }
  }
  return json;
}

EvalReport run_pipeline(const Workspace& ws, const RunConfig& cfg, const Logger& log) {
  if (cfg.synthetic_n > 0) {
    stage_synth(ws, cfg.synthetic_n, cfg.synthetic_seed, log);
  } else {
    stage_ingest(ws, cfg, log);
  }
  stage_train_cnn(ws, cfg, log);
  stage_extract(ws, {FeatureTag::deep, FeatureTag::hog, FeatureTag::lbp}, log);
  stage_fuse(ws, log);
  stage_train_clf(ws, cfg, log);
  EvalReport report = stage_evaluate(ws, log);
  stage_report(ws, ReportFormat::text);
  stage_report(ws, ReportFormat::svg);
  return report;
}

}  // namespace fusion_mammo::pipeline
