#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gfs {

using Matrix = Eigen::MatrixXd;

/// Bad user input: unreadable files, malformed values, violated
/// preconditions on data supplied from outside the library.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Column indices (0-based) into a dataset, strictly increasing and
/// non-empty. Reports print them 1-based.
class FeatureSubset {
 public:
  FeatureSubset() = default;
  explicit FeatureSubset(std::vector<int> indices);

  static FeatureSubset all(int d);

  int size() const { return static_cast<int>(indices_.size()); }
  bool empty() const { return indices_.empty(); }
  int operator[](std::size_t i) const { return indices_[i]; }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }
  const std::vector<int>& indices() const { return indices_; }
  bool contains(int feature) const;

  /// Throws InputError unless every index is < d.
  void check_against(int d) const;

  friend bool operator==(const FeatureSubset&, const FeatureSubset&) = default;

 private:
  std::vector<int> indices_;
};

/// Union of two subsets.
FeatureSubset merge(const FeatureSubset& a, const FeatureSubset& b);

/// n×d observations with dense group labels 0..K-1. Immutable once built.
class LabeledDataset {
 public:
  LabeledDataset(Matrix values, std::vector<int> labels,
                 std::vector<std::string> feature_names = {},
                 std::vector<std::string> group_names = {});

  int n() const { return static_cast<int>(values_.rows()); }
  int d() const { return static_cast<int>(values_.cols()); }
  int k() const { return static_cast<int>(group_sizes_.size()); }

  const Matrix& values() const { return values_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<int>& group_sizes() const { return group_sizes_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<std::string>& group_names() const { return group_names_; }

  LabeledDataset project(const FeatureSubset& subset) const;

  /// Rows in the given order; every group must remain represented.
  LabeledDataset select_rows(std::span<const int> rows) const;

 private:
  Matrix values_;
  std::vector<int> labels_;
  std::vector<int> group_sizes_;
  std::vector<std::string> feature_names_;
  std::vector<std::string> group_names_;
};

enum class LabelRule { as_is, zero_vs_positive };

struct LoadOptions {
  /// Header name or 1-based column number.
  std::string label_column;
  char delimiter = ',';
  /// nullopt: detect by trying to parse the first row as numbers.
  std::optional<bool> has_header;
  /// Columns (names or 1-based numbers) ignored entirely.
  std::vector<std::string> drop_columns;
  LabelRule label_rule = LabelRule::as_is;
};

LabeledDataset load_dataset(const std::string& path, const LoadOptions& options);

/// Label 0 (first group) where value == 0, 1 where value > 0.
std::vector<int> binarize_label(std::span<const double> values);

/// Writes values and labels back as delimited text with 17 significant digits.
void write_dataset(const LabeledDataset& data, const std::string& path, char delimiter = ',');

}  // namespace gfs
