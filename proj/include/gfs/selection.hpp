#pragma once

#include "gfs/clustering.hpp"
#include "gfs/crossmatch.hpp"
#include "gfs/dataset.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace gfs {

/// min(1, raw_p * d / subset_size).
double adjusted_p(double raw_p, int subset_size, int d);

struct NodeResult {
  int node = -1;
  FeatureSubset subset;
  double raw_p = 1.0;
  double adjusted_p = 1.0;
  double statistic = std::numeric_limits<double>::quiet_NaN();
  int dof = 0;
  bool tested = false;
  bool terminal = false;
};

struct SelectionReport {
  std::vector<int> selected;  // 0-based feature indices, sorted
  double alpha = 0.05;
  std::vector<NodeResult> trace;  // tested nodes, tree pre-order
  int tests_performed = 0;
  std::uint64_t seed = 0;
  Calibration calibration = Calibration::chi_square;
};

struct NodeTestResult {
  double raw_p = 1.0;
  double statistic = std::numeric_limits<double>::quiet_NaN();
  int dof = 0;
};

/// Raw p-value of the homogeneity test restricted to a node's features.
using NodeTest = std::function<NodeTestResult(int node, const FeatureSubset& features)>;

/// The hierarchical procedure: test the root and stop if it is not
/// significant after adjustment; at a significant node, a singleton is
/// selected, otherwise both children are tested and the node is selected
/// when neither child is significant, else the search descends into every
/// significant child. Each node is tested at most once.
SelectionReport gfs_select(const ClusterTree& tree, double alpha, const NodeTest& test);

/// Same procedure with the crossmatch test; node `id` uses random substream
/// `id` of config.seed.
SelectionReport gfs_select(const LabeledDataset& data, const ClusterTree& tree, double alpha,
                           const TestConfig& config);

struct BootstrapReport {
  int iterations = 0;
  std::vector<int> frequency;   // per feature, 0-based index
  std::vector<int> stable_set;  // features selected in every iteration
  int subsample_per_class = 0;
  std::uint64_t seed = 0;
  double alpha = 0.05;
};

struct BootstrapOptions {
  int iterations = 1000;
  /// Rows drawn per class without replacement; 0 means the smallest class size.
  int subsample_per_class = 0;
  unsigned workers = 1;
};

/// Repeats the selection on class-balanced subsamples with a fixed tree.
BootstrapReport bootstrap_select(const LabeledDataset& data, const ClusterTree& tree, double alpha,
                                 const TestConfig& config, const BootstrapOptions& options);

/// Per-group variant: each group gets its own single-linkage tree (built
/// once from the full data with `tree_method`) and its own multiplicity
/// family, i.e. the group size plays the role of d in the adjustment.
BootstrapReport bootstrap_select(const LabeledDataset& data, const FeatureGroups& groups, double alpha,
                                 const TestConfig& config, const BootstrapOptions& options,
                                 Correlation tree_method = Correlation::pearson);

}  // namespace gfs
