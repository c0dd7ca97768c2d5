#pragma once

#include "gfs/dataset.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace gfs {

enum class Correlation { pearson, spearman };

std::string to_string(Correlation c);
Correlation parse_correlation(const std::string& s);

/// d x d correlation matrix of the columns. Constant columns correlate 0
/// with every other column (and 1 with themselves).
Matrix correlation_matrix(const Matrix& values, Correlation method);

/// 1 - r for every column pair; diagonal exactly 0.
Matrix correlation_dissimilarity(const LabeledDataset& data, Correlation method);

/// Rooted binary tree over features 0..d-1. Node ids: leaves 0..d-1 are the
/// singletons {i}; internal node d + t is created by merge t; the root is
/// the last node. The left child holds the smaller minimum feature index.
class ClusterTree {
 public:
  struct Node {
    FeatureSubset features;
    int parent = -1;
    int left = -1;
    int right = -1;
    double height = 0.0;

    bool is_leaf() const { return left < 0; }
  };

  /// Single-linkage agglomeration. Among pairs at the minimum distance the
  /// pair with the lexicographically smallest (min index, min index) key
  /// merges first.
  static ClusterTree single_linkage(const Matrix& dissimilarity);

  /// Builds from explicit merges (child ids per step), validating structure.
  static ClusterTree from_merges(int d, const std::vector<std::pair<int, int>>& merges,
                                 const std::vector<double>& heights = {});

  int d() const { return d_; }
  int root() const { return static_cast<int>(nodes_.size()) - 1; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<Node>& nodes() const { return nodes_; }

  /// Node ids in pre-order (node, left subtree, right subtree).
  std::vector<int> preorder() const;

  /// Throws std::logic_error if the root/children/leaf properties fail.
  void validate() const;

  nlohmann::json to_json(const std::vector<std::string>& names = {}) const;
  std::string to_newick(const std::vector<std::string>& names = {}) const;

 private:
  int d_ = 0;
  std::vector<Node> nodes_;
};

struct FeatureGroups {
  std::vector<FeatureSubset> groups;
  std::vector<int> pivots;
  std::vector<double> rho_used;
};

/// Pivot-based partition of the features into `num_groups` groups from
/// Spearman correlations. Each round picks the remaining feature with the
/// most remaining neighbours at correlation >= rho (lowering rho by
/// `rho_step` until some neighbourhood is non-empty) and packs it with its
/// most correlated remaining features up to ceil(remaining / groups left).
FeatureGroups pivot_groups(const LabeledDataset& data, int num_groups = 8, double rho_start = 0.5,
                           double rho_step = 0.05);

}  // namespace gfs
