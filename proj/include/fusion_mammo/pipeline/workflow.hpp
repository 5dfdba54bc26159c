#pragma once

#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fusion_mammo/features/feature_vector.hpp"
#include "fusion_mammo/pipeline/manifest.hpp"
#include "fusion_mammo/pipeline/report.hpp"
#include "fusion_mammo/pipeline/run_config.hpp"

namespace fusion_mammo::pipeline {

/// Artifact layout under a work directory. Every stage reads and writes
/// only here, so a run can be moved as a whole.
struct Workspace {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "manifest.csv"; }
  std::filesystem::path network() const { return root / "models" / "cvgg.model"; }
  std::filesystem::path features() const { return root / "features"; }
  std::filesystem::path classifier() const { return root / "models" / "classifier.bin"; }
  std::filesystem::path classifier_config() const { return root / "models" / "classifier.conf"; }
  std::filesystem::path report_json() const { return root / "reports" / "report.json"; }
  std::filesystem::path report_text() const { return root / "reports" / "report.txt"; }
  std::filesystem::path report_svg() const { return root / "reports" / "confusion.svg"; }
  /// Relative paths are taken relative to the root.
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

using Logger = std::function<void(std::string_view)>;

/// Ingests the configured CSVs into manifest.csv (then subsamples and
/// re-splits when dataset.subset is set).
DatasetManifest stage_ingest(const Workspace& ws, const RunConfig& cfg, const Logger& log = {});
/// Generates dataset.synthetic_n images and their manifest.
DatasetManifest stage_synth(const Workspace& ws, std::size_t n, std::uint64_t seed, const Logger& log = {});
/// Trains cVGG on the train split; returns per-epoch mean loss.
std::vector<double> stage_train_cnn(const Workspace& ws, const RunConfig& cfg, const Logger& log = {});
/// Extracts the requested descriptors for every manifest image. Deep
/// extraction needs a trained network (StateError naming train-cnn).
/// Returns the number of new records written.
std::size_t stage_extract(const Workspace& ws, const std::set<FeatureTag>& tags, const Logger& log = {});
/// Concatenates stored deep/hog/lbp vectors into fused vectors.
std::size_t stage_fuse(const Workspace& ws, const Logger& log = {});
/// Trains the configured classifier on the train split.
void stage_train_clf(const Workspace& ws, const RunConfig& cfg, const Logger& log = {});
/// Evaluates the trained classifier on the test split; writes report.json.
EvalReport stage_evaluate(const Workspace& ws, const Logger& log = {});

enum class ReportFormat { json, text, svg };
ReportFormat parse_report_format(std::string_view name);
/// Renders report.json in the requested format, writes it next to it and
/// returns the rendered text.
std::string stage_report(const Workspace& ws, ReportFormat format);

/// Every stage in order: synth or ingest, train-cnn, extract (all), fuse,
/// train-clf, evaluate, and all three report formats.
EvalReport run_pipeline(const Workspace& ws, const RunConfig& cfg, const Logger& log = {});

}  // namespace fusion_mammo::pipeline
