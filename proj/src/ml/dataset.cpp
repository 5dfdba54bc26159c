#include "fusion_mammo/ml/dataset.hpp"

#include <cmath>
#include <string>

#include "fusion_mammo/error.hpp"

namespace fusion_mammo::ml {

LabeledMatrix::LabeledMatrix(std::size_t cols, std::vector<float> values, std::vector<std::uint8_t> labels)
    : cols_(cols), values_(std::move(values)), labels_(std::move(labels)) {
  if (values_.size() != cols_ * labels_.size()) {
    throw DimensionError("labeled matrix: " + std::to_string(values_.size()) + " values for " +
                         std::to_string(labels_.size()) + " rows of " + std::to_string(cols_));
  }
  for (auto l : labels_) {
    if (l > 1) throw ArgumentError("labeled matrix: label " + std::to_string(l) + " outside {0,1}");
  }
}

void LabeledMatrix::add_row(std::span<const float> row, int label) {
  if (row.size() != cols_) {
    throw DimensionError("labeled matrix: row of length " + std::to_string(row.size()) + ", expected " +
                         std::to_string(cols_));
  }
  if (label != 0 && label != 1) throw ArgumentError("labeled matrix: label " + std::to_string(label) + " outside {0,1}");
  values_.insert(values_.end(), row.begin(), row.end());
  labels_.push_back(static_cast<std::uint8_t>(label));
}

bool LabeledMatrix::has_both_classes() const {
  bool seen[2] = {false, false};
  for (auto l : labels_) seen[l] = true;
  return seen[0] && seen[1];
}

void LabeledMatrix::require_finite() const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw DataError("non-finite feature value at row " + std::to_string(i / cols_) + ", column " +
                      std::to_string(i % cols_));
    }
  }
}

StandardizationStats standardize_fit(const LabeledMatrix& m) {
  if (m.rows() < 2) throw ArgumentError("standardize_fit needs at least 2 rows, got " + std::to_string(m.rows()));
  StandardizationStats stats;
  stats.mean.assign(m.cols(), 0.0);
  stats.stddev.assign(m.cols(), 0.0);
  const double n = static_cast<double>(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) stats.mean[c] += m.at(r, c);
  }
  for (double& v : stats.mean) v /= n;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double d = m.at(r, c) - stats.mean[c];
      stats.stddev[c] += d * d;
    }
  }
  for (double& v : stats.stddev) v = std::sqrt(v / n);
  return stats;
}

std::vector<float> standardize_apply(const StandardizationStats& stats, std::span<const float> row) {
  if (row.size() != stats.dims()) {
    throw DimensionError("standardize: row of length " + std::to_string(row.size()) + ", stats have " +
                         std::to_string(stats.dims()));
  }
  std::vector<float> out(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) {
    out[c] = stats.stddev[c] > 0.0 ? static_cast<float>((row[c] - stats.mean[c]) / stats.stddev[c]) : row[c];
  }
  return out;
}

std::vector<float> standardize_invert(const StandardizationStats& stats, std::span<const float> row) {
  if (row.size() != stats.dims()) {
    throw DimensionError("standardize: row of length " + std::to_string(row.size()) + ", stats have " +
                         std::to_string(stats.dims()));
  }
  std::vector<float> out(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) {
    out[c] = stats.stddev[c] > 0.0 ? static_cast<float>(row[c] * stats.stddev[c] + stats.mean[c]) : row[c];
  }
  return out;
}

LabeledMatrix standardize_apply(const StandardizationStats& stats, const LabeledMatrix& m) {
  LabeledMatrix out(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) out.add_row(standardize_apply(stats, m.row(r)), m.label(r));
  return out;
}

}  // namespace fusion_mammo::ml
