#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fusion_mammo::ml {

/// Row-major float matrix with one binary label per row.
class LabeledMatrix {
 public:
  explicit LabeledMatrix(std::size_t cols = 0) : cols_(cols) {}
  LabeledMatrix(std::size_t cols, std::vector<float> values, std::vector<std::uint8_t> labels);

  /// Throws DimensionError on a length mismatch, ArgumentError on a label outside {0,1}.
  void add_row(std::span<const float> row, int label);

  std::size_t rows() const { return labels_.size(); }
  std::size_t cols() const { return cols_; }
  std::span<const float> row(std::size_t i) const { return std::span(values_).subspan(i * cols_, cols_); }
  int label(std::size_t i) const { return labels_[i]; }
  std::span<const float> values() const { return values_; }
  std::span<const std::uint8_t> labels() const { return labels_; }
  float at(std::size_t row, std::size_t col) const { return values_[row * cols_ + col]; }

  bool has_both_classes() const;
  /// DataError naming the first non-finite cell.
  void require_finite() const;

 private:
  std::size_t cols_;
  std::vector<float> values_;
  std::vector<std::uint8_t> labels_;
};

/// Per-dimension z-score parameters. A zero-variance dimension has stddev 0
/// and passes through unchanged.
struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t dims() const { return mean.size(); }
};

/// Population statistics over all rows; needs at least two rows.
StandardizationStats standardize_fit(const LabeledMatrix& m);
std::vector<float> standardize_apply(const StandardizationStats& stats, std::span<const float> row);
std::vector<float> standardize_invert(const StandardizationStats& stats, std::span<const float> row);
LabeledMatrix standardize_apply(const StandardizationStats& stats, const LabeledMatrix& m);

struct Prediction {
  int label;
  double probability;  // P(class 1)
};

}  // namespace fusion_mammo::ml
