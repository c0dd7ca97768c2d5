#include "gfs/selection.hpp"

#include "gfs/parallel.hpp"
#include "gfs/random.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace gfs {

double adjusted_p(double raw_p, int subset_size, int d) {
  if (!(raw_p >= 0.0 && raw_p <= 1.0)) throw InputError("raw p-value must lie in [0, 1]");
  if (subset_size < 1 || subset_size > d) throw InputError("subset size must lie in 1..d");
  return std::min(1.0, raw_p * static_cast<double>(d) / static_cast<double>(subset_size));
}

SelectionReport gfs_select(const ClusterTree& tree, double alpha, const NodeTest& test) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  const int d = tree.d();
  std::map<int, NodeResult> tested;

  auto run = [&](int id) -> const NodeResult& {
    const auto& node = tree.node(id);
    const NodeTestResult r = test(id, node.features);
    NodeResult res;
    res.node = id;
    res.subset = node.features;
    res.raw_p = r.raw_p;
    res.adjusted_p = adjusted_p(r.raw_p, node.features.size(), d);
    res.statistic = r.statistic;
    res.dof = r.dof;
    res.tested = true;
    return tested.emplace(id, std::move(res)).first->second;
  };
  auto significant = [&](int id) { return tested.at(id).adjusted_p <= alpha; };

  // Work list of significant nodes whose children still need a decision.
  std::vector<int> pending;
  if (run(tree.root()).adjusted_p <= alpha) pending.push_back(tree.root());
  while (!pending.empty()) {
    const int id = pending.back();
    pending.pop_back();
    const auto& node = tree.node(id);
    if (node.is_leaf()) {
      tested.at(id).terminal = true;
      continue;
    }
    run(node.left);
    run(node.right);
    const bool left_sig = significant(node.left);
    const bool right_sig = significant(node.right);
    if (!left_sig && !right_sig) {
      tested.at(id).terminal = true;
      continue;
    }
    if (right_sig) pending.push_back(node.right);
    if (left_sig) pending.push_back(node.left);
  }

  SelectionReport report;
  report.alpha = alpha;
  report.tests_performed = static_cast<int>(tested.size());
  for (int id : tree.preorder()) {
    auto it = tested.find(id);
    if (it == tested.end()) continue;
    if (it->second.terminal)
      report.selected.insert(report.selected.end(), it->second.subset.begin(), it->second.subset.end());
    report.trace.push_back(std::move(it->second));
  }
  std::sort(report.selected.begin(), report.selected.end());
  return report;
}

SelectionReport gfs_select(const LabeledDataset& data, const ClusterTree& tree, double alpha,
                           const TestConfig& config) {
  if (tree.d() != data.d())
    throw InputError("tree covers " + std::to_string(tree.d()) + " features but data have " +
                     std::to_string(data.d()));
  SelectionReport report = gfs_select(tree, alpha, [&](int id, const FeatureSubset& features) {
    const TestOutcome t = mmcm_test(data, features, config, static_cast<std::uint64_t>(id));
    return NodeTestResult{t.p_value, t.statistic, t.dof};
  });
  report.seed = config.seed;
  report.calibration = config.calibration;
  return report;
}

namespace {

struct Family {
  std::vector<int> global;  // local feature index -> dataset column
  ClusterTree tree;
};

BootstrapReport run_bootstrap(const LabeledDataset& data, const std::vector<Family>& families, double alpha,
                              const TestConfig& config, const BootstrapOptions& options) {
  if (options.iterations < 1) throw InputError("bootstrap iterations must be >= 1");
  const auto& sizes = data.group_sizes();
  const int min_class = *std::min_element(sizes.begin(), sizes.end());
  const int per_class = options.subsample_per_class == 0 ? min_class : options.subsample_per_class;
  if (per_class < 1 || per_class > min_class)
    throw InputError("subsample of " + std::to_string(per_class) + " per class exceeds the smallest class (" +
                     std::to_string(min_class) + ")");

  std::vector<std::vector<int>> rows_of(static_cast<std::size_t>(data.k()));
  for (int i = 0; i < data.n(); ++i) rows_of[static_cast<std::size_t>(data.labels()[static_cast<std::size_t>(i)])].push_back(i);

  std::vector<std::vector<int>> picked(static_cast<std::size_t>(options.iterations));
  TestConfig inner = config;
  inner.workers = 1;
  parallel_for(static_cast<std::size_t>(options.iterations), options.workers, [&](std::size_t it) {
    Rng rng = make_rng(config.seed, 0xB0075000ULL + it);
    std::vector<int> rows;
    for (const auto& cls : rows_of)
      std::sample(cls.begin(), cls.end(), std::back_inserter(rows), per_class, rng);
    const LabeledDataset sub = data.select_rows(rows);
    std::vector<int> chosen;
    for (std::size_t f = 0; f < families.size(); ++f) {
      const auto& fam = families[f];
      TestConfig cfg = inner;
      cfg.seed = derive_seed(derive_seed(config.seed, it), f);
      const SelectionReport rep = gfs_select(sub.project(FeatureSubset(fam.global)), fam.tree, alpha, cfg);
      for (int local : rep.selected) chosen.push_back(fam.global[static_cast<std::size_t>(local)]);
    }
    picked[it] = std::move(chosen);
  });

  BootstrapReport out;
  out.iterations = options.iterations;
  out.subsample_per_class = per_class;
  out.seed = config.seed;
  out.alpha = alpha;
  out.frequency.assign(static_cast<std::size_t>(data.d()), 0);
  for (const auto& sel : picked)
    for (int f : sel) ++out.frequency[static_cast<std::size_t>(f)];
  for (int f = 0; f < data.d(); ++f)
    if (out.frequency[static_cast<std::size_t>(f)] == options.iterations) out.stable_set.push_back(f);
  return out;
}

}  // namespace

BootstrapReport bootstrap_select(const LabeledDataset& data, const ClusterTree& tree, double alpha,
                                 const TestConfig& config, const BootstrapOptions& options) {
  if (tree.d() != data.d()) throw InputError("tree and data disagree on d");
  std::vector<Family> fams{{FeatureSubset::all(data.d()).indices(), tree}};
  return run_bootstrap(data, fams, alpha, config, options);
}

BootstrapReport bootstrap_select(const LabeledDataset& data, const FeatureGroups& groups, double alpha,
                                 const TestConfig& config, const BootstrapOptions& options,
                                 Correlation tree_method) {
  std::vector<Family> fams;
  std::vector<int> seen(static_cast<std::size_t>(data.d()), 0);
  for (const auto& g : groups.groups) {
    g.check_against(data.d());
    for (int f : g) ++seen[static_cast<std::size_t>(f)];
    const LabeledDataset part = data.project(g);
    fams.push_back({g.indices(), ClusterTree::single_linkage(correlation_dissimilarity(part, tree_method))});
  }
  if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; }))
    throw InputError("feature groups must partition the features");
  return run_bootstrap(data, fams, alpha, config, options);
}

}  // namespace gfs
