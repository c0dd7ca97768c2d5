#include "gfs/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace gfs {

FeatureSubset::FeatureSubset(std::vector<int> indices) : indices_(std::move(indices)) {
  if (indices_.empty()) throw InputError("feature subset must be non-empty");
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] < 0) throw InputError("feature index must be positive");
    if (i > 0 && indices_[i] <= indices_[i - 1])
      throw InputError("feature subset must be strictly increasing without duplicates");
  }
}

FeatureSubset FeatureSubset::all(int d) {
  std::vector<int> idx(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) idx[static_cast<std::size_t>(i)] = i;
  return FeatureSubset(std::move(idx));
}

bool FeatureSubset::contains(int feature) const {
  return std::binary_search(indices_.begin(), indices_.end(), feature);
}

void FeatureSubset::check_against(int d) const {
  if (!indices_.empty() && indices_.back() >= d)
    throw InputError("feature index " + std::to_string(indices_.back() + 1) +
                     " out of range for d = " + std::to_string(d));
}

FeatureSubset merge(const FeatureSubset& a, const FeatureSubset& b) {
  std::vector<int> out;
  out.reserve(a.indices().size() + b.indices().size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return FeatureSubset(std::move(out));
}

LabeledDataset::LabeledDataset(Matrix values, std::vector<int> labels,
                               std::vector<std::string> feature_names,
                               std::vector<std::string> group_names)
    : values_(std::move(values)),
      labels_(std::move(labels)),
      feature_names_(std::move(feature_names)),
      group_names_(std::move(group_names)) {
  if (values_.rows() < 2) throw InputError("at least 2 observations required");
  if (values_.cols() < 1) throw InputError("at least 1 feature required");
  if (static_cast<Eigen::Index>(labels_.size()) != values_.rows())
    throw InputError("label count does not match row count");
  if (!values_.allFinite()) throw InputError("observation matrix contains non-finite values");
  int k = 0;
  for (int l : labels_) {
    if (l < 0) throw InputError("group labels must be non-negative");
    k = std::max(k, l + 1);
  }
  if (k < 2) throw InputError("K >= 2 required: data contain a single group");
  group_sizes_.assign(static_cast<std::size_t>(k), 0);
  for (int l : labels_) ++group_sizes_[static_cast<std::size_t>(l)];
  for (int g = 0; g < k; ++g)
    if (group_sizes_[static_cast<std::size_t>(g)] == 0)
      throw InputError("group " + std::to_string(g + 1) + " has no observations");

  if (feature_names_.empty()) {
    for (int j = 0; j < d(); ++j) feature_names_.push_back("x" + std::to_string(j + 1));
  } else if (static_cast<int>(feature_names_.size()) != d()) {
    throw InputError("feature name count does not match column count");
  }
  if (group_names_.empty()) {
    for (int g = 0; g < k; ++g) group_names_.push_back(std::to_string(g + 1));
  } else if (static_cast<int>(group_names_.size()) != k) {
    throw InputError("group name count does not match K");
  }
}

LabeledDataset LabeledDataset::project(const FeatureSubset& subset) const {
  subset.check_against(d());
  Matrix out(values_.rows(), subset.size());
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(subset.size()));
  for (int j = 0; j < subset.size(); ++j) {
    out.col(j) = values_.col(subset[static_cast<std::size_t>(j)]);
    names.push_back(feature_names_[static_cast<std::size_t>(subset[static_cast<std::size_t>(j)])]);
  }
  return LabeledDataset(std::move(out), labels_, std::move(names), group_names_);
}

LabeledDataset LabeledDataset::select_rows(std::span<const int> rows) const {
  Matrix out(static_cast<Eigen::Index>(rows.size()), values_.cols());
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= n()) throw InputError("row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = values_.row(rows[i]);
    labels.push_back(labels_[static_cast<std::size_t>(rows[i])]);
  }
  return LabeledDataset(std::move(out), std::move(labels), feature_names_, group_names_);
}

std::vector<int> binarize_label(std::span<const double> values) {
  std::vector<int> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v)) throw InputError("label value at row " + std::to_string(i + 1) + " is not finite");
    if (v < 0) throw InputError("negative label value at row " + std::to_string(i + 1) +
                                " under zero-vs-positive rule");
    out.push_back(v > 0 ? 1 : 0);
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string_view rest(line);
  for (;;) {
    auto pos = rest.find(delim);
    out.push_back(trim(rest.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  return out;
}

std::optional<double> parse_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Resolves a column given by header name or 1-based number.
std::optional<std::size_t> resolve_column(const std::string& spec, const std::vector<std::string>& header,
                                          std::size_t width) {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == spec) return j;
  std::size_t idx = 0;
  auto [ptr, ec] = std::from_chars(spec.data(), spec.data() + spec.size(), idx);
  if (ec == std::errc() && ptr == spec.data() + spec.size() && idx >= 1 && idx <= width) return idx - 1;
  return std::nullopt;
}

}  // namespace

LabeledDataset load_dataset(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);

  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    rows.push_back(split(line, options.delimiter));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw InputError(path + ": file is empty");
  const std::size_t width = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].size() != width)
      throw InputError(path + ":" + std::to_string(line_numbers[r]) + ": expected " + std::to_string(width) +
                       " fields, found " + std::to_string(rows[r].size()));

  bool has_header = false;
  if (options.has_header) {
    has_header = *options.has_header;
  } else {
    // A header row has some field that is non-numeric where the next row is numeric.
    has_header = false;
    for (std::size_t j = 0; j < width; ++j) {
      const bool numeric_below = rows.size() < 2 || parse_real(rows[1][j]).has_value();
      if (!parse_real(rows.front()[j]) && numeric_below) has_header = true;
    }
  }

  std::vector<std::string> header;
  if (has_header) {
    header = rows.front();
    rows.erase(rows.begin());
    line_numbers.erase(line_numbers.begin());
  }
  if (rows.empty()) throw InputError(path + ": no data rows");

  auto label_col = resolve_column(options.label_column, header, width);
  if (!label_col) throw InputError(path + ": label column '" + options.label_column + "' not found");

  std::vector<bool> dropped(width, false);
  dropped[*label_col] = true;
  for (const auto& spec : options.drop_columns) {
    auto c = resolve_column(spec, header, width);
    if (!c) throw InputError(path + ": column '" + spec + "' to drop not found");
    if (*c == *label_col) throw InputError(path + ": cannot drop the label column");
    dropped[*c] = true;
  }
  std::vector<std::size_t> feature_cols;
  for (std::size_t j = 0; j < width; ++j)
    if (!dropped[j]) feature_cols.push_back(j);
  if (feature_cols.empty()) throw InputError(path + ": no feature columns");

  std::vector<std::string> names;
  for (auto j : feature_cols) names.push_back(has_header ? header[j] : "x" + std::to_string(j + 1));

  Matrix values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_cols.size()));
  std::vector<std::string> raw_labels;
  raw_labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < feature_cols.size(); ++c) {
      const auto& field = rows[r][feature_cols[c]];
      auto v = parse_real(field);
      const std::string where = path + ":" + std::to_string(line_numbers[r]) + ": column " +
                                std::to_string(feature_cols[c] + 1) + " (" + names[c] + ")";
      if (field.empty() || field == "NA" || field == "NaN" || field == "nan")
        throw InputError(where + ": missing value");
      if (!v) throw InputError(where + ": cannot parse '" + field + "' as a real number");
      if (!std::isfinite(*v)) throw InputError(where + ": non-finite value");
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *v;
    }
    const auto& lab = rows[r][*label_col];
    if (lab.empty()) throw InputError(path + ":" + std::to_string(line_numbers[r]) + ": missing label");
    raw_labels.push_back(lab);
  }

  std::vector<int> labels;
  std::vector<std::string> group_names;
  if (options.label_rule == LabelRule::zero_vs_positive) {
    std::vector<double> numeric;
    numeric.reserve(raw_labels.size());
    for (std::size_t r = 0; r < raw_labels.size(); ++r) {
      auto v = parse_real(raw_labels[r]);
      if (!v) throw InputError(path + ":" + std::to_string(line_numbers[r]) + ": label '" + raw_labels[r] +
                               "' is not numeric");
      numeric.push_back(*v);
    }
    labels = binarize_label(numeric);
    group_names = {"zero", "positive"};
  } else {
    std::map<std::string, int> code;
    for (const auto& lab : raw_labels) {
      auto [it, inserted] = code.try_emplace(lab, static_cast<int>(group_names.size()));
      if (inserted) group_names.push_back(lab);
      labels.push_back(it->second);
    }
  }
  return LabeledDataset(std::move(values), std::move(labels), std::move(names), std::move(group_names));
}

void write_dataset(const LabeledDataset& data, const std::string& path, char delimiter) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << std::setprecision(17);
  for (int j = 0; j < data.d(); ++j) out << data.feature_names()[static_cast<std::size_t>(j)] << delimiter;
  out << "label\n";
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.d(); ++j) out << data.values()(i, j) << delimiter;
    out << data.group_names()[static_cast<std::size_t>(data.labels()[static_cast<std::size_t>(i)])] << '\n';
  }
}

}  // namespace gfs
