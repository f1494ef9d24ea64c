#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace capmeter {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Task { Classification, Regression };

struct Dataset {
  RowMatrix inputs;            // N x d
  std::vector<double> labels;  // class index in [0, m) or a real target
  Task task = Task::Classification;
  int m_classes = 2;           // unused for regression

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(inputs.cols()); }
  bool is_regression() const { return task == Task::Regression; }

  std::span<const double> row(std::size_t i) const {
    return {inputs.data() + i * feature_dim(), feature_dim()};
  }
  int label(std::size_t i) const { return static_cast<int>(labels[i]); }

  // Throws InvariantViolation on non-finite entries, out-of-range labels or N = 0.
  void validate() const;

  // Rows in the given order; duplicates allowed.
  Dataset subset(std::span<const std::size_t> rows) const;
};

enum class LabelMode { Auto, Classification, Regression };

// Comma-separated numeric table, last column is the label. Leading '#' lines are
// comments; a first non-comment line that does not parse as numbers is a header.
// Class labels (numeric or symbolic) are remapped to [0, m) in sorted order.
Dataset read_tabular(std::istream& in, LabelMode mode = LabelMode::Auto);
Dataset load_tabular(const std::filesystem::path& path, LabelMode mode = LabelMode::Auto);

}  // namespace capmeter
