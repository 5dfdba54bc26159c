#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fusion_mammo::pipeline {

struct EvalReport {
  double accuracy = 0.0;
  /// confusion[true][predicted], class 0 benign, 1 malignant.
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  /// nullopt when the denominator is zero.
  std::array<std::optional<double>, 2> precision{};
  std::array<std::optional<double>, 2> recall{};

  std::string classifier;
  std::string feature_set;
  std::size_t feature_length = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::string config_fingerprint;
  std::string network_fingerprint;
  std::vector<std::string> warnings;
  /// Kept out of the persisted JSON so reruns write identical bytes.
  double wall_time_seconds = 0.0;

  std::size_t total() const;
};

/// ArgumentError on empty input, unequal lengths or labels outside {0,1}.
EvalReport compute_metrics(std::span<const int> predictions, std::span<const int> labels);

std::string report_to_json(const EvalReport& report);
/// FormatError on malformed documents.
EvalReport report_from_json(std::string_view text);
std::string report_to_text(const EvalReport& report);
/// Standalone SVG figure of the confusion matrix.
std::string report_to_svg(const EvalReport& report);

}  // namespace fusion_mammo::pipeline
