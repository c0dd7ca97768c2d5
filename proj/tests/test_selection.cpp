#include "doctest.h"
#include "gfs/random.hpp"
#include "gfs/selection.hpp"
#include "oracles.hpp"

#include <map>
#include <numeric>
#include <random>
#include <set>

using gfs::ClusterTree;
using gfs::FeatureSubset;
using gfs::LabeledDataset;
using gfs::Matrix;
using gfs::NodeTestResult;

namespace {

/// Converts a nested shape into explicit merges (post-order).
ClusterTree tree_from_shape(const oracle::TreeShape& shape, int d) {
  std::vector<std::pair<int, int>> merges;
  auto build = [&](auto&& self, const oracle::TreeShape& s) -> int {
    if (s.children.empty()) return s.features[0];
    const int l = self(self, s.children[0]);
    const int r = self(self, s.children[1]);
    merges.emplace_back(l, r);
    return d + static_cast<int>(merges.size()) - 1;
  };
  build(build, shape);
  return ClusterTree::from_merges(d, merges);
}

struct Structure {
  std::vector<std::vector<int>> features;
  std::vector<int> parent;
  std::vector<std::vector<int>> children;
};

Structure structure_of(const ClusterTree& t) {
  Structure s;
  for (int id = 0; id < t.size(); ++id) {
    const auto& n = t.node(id);
    s.features.push_back(n.features.indices());
    s.parent.push_back(n.parent);
    s.children.push_back(n.is_leaf() ? std::vector<int>{} : std::vector<int>{n.left, n.right});
  }
  return s;
}

/// Rows of two groups; group 1 is shifted by `shift` on the listed features.
LabeledDataset planted(int per_group, int d, const std::vector<int>& signal, double shift, std::uint64_t seed) {
  gfs::Rng rng(seed);
  std::normal_distribution<double> z;
  Matrix v(2 * per_group, d);
  std::vector<int> labels;
  for (int i = 0; i < 2 * per_group; ++i) {
    const int g = i < per_group ? 0 : 1;
    labels.push_back(g);
    for (int j = 0; j < d; ++j) v(i, j) = z(rng);
    for (int j : signal) v(i, j) += g * shift;
  }
  return LabeledDataset(v, labels);
}

}  // namespace

TEST_CASE("adjusted p-values") {
  CHECK(gfs::adjusted_p(0.02, 25, 100) == doctest::Approx(0.08));
  CHECK(gfs::adjusted_p(0.037, 7, 7) == 0.037);
  CHECK(gfs::adjusted_p(0.5, 1, 100) == 1.0);
  CHECK_THROWS_AS(gfs::adjusted_p(0.5, 0, 10), gfs::InputError);
  CHECK_THROWS_AS(gfs::adjusted_p(0.5, 11, 10), gfs::InputError);
}

TEST_CASE("root not significant: empty selection after one test") {
  const auto t = ClusterTree::from_merges(3, {{0, 1}, {3, 2}});
  int calls = 0;
  const auto r = gfs::gfs_select(t, 0.05, [&](int, const FeatureSubset&) {
    ++calls;
    return NodeTestResult{0.3};
  });
  CHECK(r.selected.empty());
  CHECK(r.tests_performed == 1);
  CHECK(calls == 1);
  REQUIRE(r.trace.size() == 1);
  CHECK(r.trace[0].node == t.root());
  CHECK_FALSE(r.trace[0].terminal);
}

TEST_CASE("d = 1: a significant leaf root is selected") {
  const auto t = ClusterTree::from_merges(1, {});
  const auto r = gfs::gfs_select(t, 0.05, [](int, const FeatureSubset&) { return NodeTestResult{0.01}; });
  CHECK(r.selected == std::vector<int>{0});
  CHECK(r.trace.at(0).terminal);
}

TEST_CASE("one significant child: recurse there, parent not selected") {
  // Features {0,1,2,3}: root 6 = {4: {0,1}, 5: {2,3}}.
  const auto t = ClusterTree::from_merges(4, {{0, 1}, {2, 3}, {4, 5}});
  const std::map<int, double> p{{6, 0.001}, {4, 0.001}, {5, 0.9}, {0, 0.001}, {1, 0.5}};
  std::multiset<int> calls;
  const auto r = gfs::gfs_select(t, 0.05, [&](int id, const FeatureSubset&) {
    calls.insert(id);
    return NodeTestResult{p.at(id)};
  });
  CHECK(r.selected == std::vector<int>{0});
  CHECK(calls == std::multiset<int>{0, 1, 4, 5, 6});
  std::vector<int> order;
  for (const auto& n : r.trace) order.push_back(n.node);
  CHECK(order == std::vector<int>{6, 4, 0, 1, 5});
  for (const auto& n : r.trace) CHECK(n.terminal == (n.node == 0));
}

TEST_CASE("both children non-significant: the parent is terminal") {
  const auto t = ClusterTree::from_merges(4, {{0, 1}, {2, 3}, {4, 5}});
  // Adjustments: root x1, pairs x2, leaves x4.
  const std::map<int, double> p{{6, 0.01}, {4, 0.02}, {5, 0.2}, {0, 0.02}, {1, 0.03}};
  const auto r = gfs::gfs_select(t, 0.05, [&](int id, const FeatureSubset&) { return NodeTestResult{p.at(id)}; });
  CHECK(r.selected == std::vector<int>{0, 1});
  CHECK(r.tests_performed == 5);
}

TEST_CASE("exhaustive: every tree over d <= 5 reproduces the brute-force terminal union") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int trees = 0, assignments = 0;
  for (int d = 1; d <= 5; ++d) {
    std::vector<int> feats(static_cast<std::size_t>(d));
    std::iota(feats.begin(), feats.end(), 0);
    for (const auto& shape : oracle::all_trees(feats)) {
      const ClusterTree t = tree_from_shape(shape, d);
      const Structure s = structure_of(t);
      ++trees;
      for (int a = 0; a < 120; ++a, ++assignments) {
        std::vector<double> raw(static_cast<std::size_t>(t.size()));
        for (auto& x : raw) x = u(rng) < 0.6 ? u(rng) * 0.02 : u(rng);
        std::vector<double> adj(raw.size());
        for (std::size_t c = 0; c < raw.size(); ++c)
          adj[c] = std::min(1.0, raw[c] * d / static_cast<double>(s.features[c].size()));
        std::map<int, int> calls;
        const auto r = gfs::gfs_select(t, 0.05, [&](int id, const FeatureSubset& f) {
          ++calls[id];
          CHECK(f.indices() == s.features[static_cast<std::size_t>(id)]);
          return NodeTestResult{raw[static_cast<std::size_t>(id)]};
        });
        const auto expect = oracle::brute_terminal_union(s.features, s.parent, s.children, adj, 0.05);
        REQUIRE(std::set<int>(r.selected.begin(), r.selected.end()) == expect);
        for (auto [id, c] : calls) CHECK(c == 1);
        // Every traced node has only significant traced ancestors.
        std::set<int> traced;
        for (const auto& n : r.trace) traced.insert(n.node);
        for (const auto& n : r.trace)
          for (int a = s.parent[static_cast<std::size_t>(n.node)]; a >= 0; a = s.parent[static_cast<std::size_t>(a)]) {
            CHECK(traced.count(a) == 1);
            CHECK(adj[static_cast<std::size_t>(a)] <= 0.05);
          }
        // No terminal node has a terminal ancestor.
        for (const auto& n : r.trace)
          if (n.terminal)
            for (int a = s.parent[static_cast<std::size_t>(n.node)]; a >= 0; a = s.parent[static_cast<std::size_t>(a)])
              for (const auto& m : r.trace)
                if (m.node == a) CHECK_FALSE(m.terminal);
      }
    }
  }
  CHECK(trees == 1 + 1 + 3 + 15 + 105);
  CHECK(assignments >= 100 * trees);
}

TEST_CASE("planted signal on features {1,2} of d = 4") {
  gfs::TestConfig cfg;
  int hits = 0;
  const int reps = 50;
  for (int r = 0; r < reps; ++r) {
    const auto data = planted(100, 4, {0, 1}, 3.0, gfs::derive_seed(31, static_cast<std::uint64_t>(r)));
    const auto tree = ClusterTree::single_linkage(gfs::correlation_dissimilarity(data, gfs::Correlation::pearson));
    cfg.seed = static_cast<std::uint64_t>(r);
    const auto rep = gfs::gfs_select(data, tree, 0.05, cfg);
    const std::set<int> s(rep.selected.begin(), rep.selected.end());
    hits += s.count(0) && s.count(1);

    // Testing every node with the same substreams gives the same answer.
    const Structure st = structure_of(tree);
    std::vector<double> adj;
    for (int id = 0; id < tree.size(); ++id) {
      const auto out = gfs::mmcm_test(data, tree.node(id).features, cfg, static_cast<std::uint64_t>(id));
      adj.push_back(gfs::adjusted_p(out.p_value, tree.node(id).features.size(), 4));
    }
    CHECK(s == oracle::brute_terminal_union(st.features, st.parent, st.children, adj, 0.05));
  }
  CHECK(hits >= 45);
}

TEST_CASE("selection is deterministic and rejects mismatched trees") {
  const auto data = planted(40, 6, {2}, 1.0, 5);
  const auto tree = ClusterTree::single_linkage(gfs::correlation_dissimilarity(data, gfs::Correlation::pearson));
  gfs::TestConfig cfg;
  cfg.calibration = gfs::Calibration::permutation;
  cfg.permutations = 199;
  const auto a = gfs::gfs_select(data, tree, 0.05, cfg);
  cfg.workers = 3;
  const auto b = gfs::gfs_select(data, tree, 0.05, cfg);
  CHECK(a.selected == b.selected);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].raw_p == b.trace[i].raw_p);
  CHECK_THROWS_AS(gfs::gfs_select(data, ClusterTree::from_merges(2, {{0, 1}}), 0.05, cfg), gfs::InputError);
  CHECK_THROWS_AS(gfs::gfs_select(data, tree, 1.0, cfg), gfs::InputError);
}

TEST_CASE("bootstrap: one iteration reproduces a single run on the subsample") {
  const auto data = planted(30, 5, {1, 3}, 1.2, 8);
  const auto tree = ClusterTree::single_linkage(gfs::correlation_dissimilarity(data, gfs::Correlation::pearson));
  gfs::BootstrapOptions opt;
  opt.iterations = 1;
  const auto r = gfs::bootstrap_select(data, tree, 0.05, gfs::TestConfig{}, opt);
  CHECK(r.iterations == 1);
  CHECK(r.subsample_per_class == 30);
  std::vector<int> from_freq;
  for (int f = 0; f < 5; ++f) {
    CHECK((r.frequency[static_cast<std::size_t>(f)] == 0 || r.frequency[static_cast<std::size_t>(f)] == 1));
    if (r.frequency[static_cast<std::size_t>(f)] == 1) from_freq.push_back(f);
  }
  CHECK(r.stable_set == from_freq);
  opt.subsample_per_class = 31;
  CHECK_THROWS_AS(gfs::bootstrap_select(data, tree, 0.05, gfs::TestConfig{}, opt), gfs::InputError);
}

TEST_CASE("bootstrap: null data keep false selections rare") {
  const auto data = planted(40, 6, {}, 0.0, 12);
  const auto tree = ClusterTree::single_linkage(gfs::correlation_dissimilarity(data, gfs::Correlation::pearson));
  gfs::BootstrapOptions opt;
  opt.iterations = 100;
  opt.subsample_per_class = 30;
  const auto r = gfs::bootstrap_select(data, tree, 0.05, gfs::TestConfig{}, opt);
  // Per iteration at most one family-wise error; the mean rate stays near alpha.
  const int total = std::accumulate(r.frequency.begin(), r.frequency.end(), 0);
  CHECK(total <= static_cast<int>((0.05 + 0.05) * 100 * 6));
  CHECK(r.stable_set.empty());
  for (int f : r.frequency) CHECK(f <= 100);
}

TEST_CASE("bootstrap: strong signal is stable, with worker-independent results") {
  int covered = 0;
  const int reps = 10;
  for (int rep = 0; rep < reps; ++rep) {
    const auto data = planted(60, 6, {0, 4}, 4.0, gfs::derive_seed(77, static_cast<std::uint64_t>(rep)));
    const auto tree = ClusterTree::single_linkage(gfs::correlation_dissimilarity(data, gfs::Correlation::pearson));
    gfs::BootstrapOptions opt;
    opt.iterations = 20;
    opt.subsample_per_class = 50;
    gfs::TestConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(rep);
    const auto r = gfs::bootstrap_select(data, tree, 0.05, cfg, opt);
    const std::set<int> st(r.stable_set.begin(), r.stable_set.end());
    covered += st.count(0) && st.count(4);
    if (rep == 0) {
      opt.workers = 3;
      const auto again = gfs::bootstrap_select(data, tree, 0.05, cfg, opt);
      CHECK(again.frequency == r.frequency);
      CHECK(again.stable_set == r.stable_set);
    }
  }
  CHECK(covered >= 9);
}

TEST_CASE("bootstrap with feature groups uses the group as its own family") {
  const auto data = planted(40, 8, {0, 5}, 2.0, 3);
  gfs::FeatureGroups groups;
  groups.groups = {FeatureSubset({0, 1, 2, 3}), FeatureSubset({4, 5, 6, 7})};
  groups.pivots = {0, 4};
  groups.rho_used = {0.5, 0.5};
  gfs::BootstrapOptions opt;
  opt.iterations = 5;
  const auto r = gfs::bootstrap_select(data, groups, 0.05, gfs::TestConfig{}, opt);
  CHECK(r.frequency.size() == 8);
  CHECK(r.frequency[0] == 5);
  CHECK(r.frequency[5] == 5);
}
