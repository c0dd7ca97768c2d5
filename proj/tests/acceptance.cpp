// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion ids
// as arguments to run a subset (e.g. `acceptance 1 2 9`).

#include "gfs/clustering.hpp"
#include "gfs/crossmatch.hpp"
#include "gfs/evaluation.hpp"
#include "gfs/matching.hpp"
#include "gfs/parallel.hpp"
#include "gfs/random.hpp"
#include "gfs/selection.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <sys/wait.h>

#ifndef GFS_CLI
#error "GFS_CLI must name the command-line binary"
#endif

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double time_limit_s;  // 0: no limit
  std::function<Verdict()> run;
};

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << x;
  return os.str();
}

std::string sci(double x) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << x;
  return os.str();
}

unsigned workers() { return gfs::default_workers(); }

gfs::SimulationSettings settings(int replicates, bool kw) {
  gfs::SimulationSettings s;
  s.alpha = 0.05;
  s.replicates = replicates;
  s.seed = 1;
  s.workers = workers();
  s.run_kw = kw;
  return s;
}

std::string metrics_line(const char* label, const gfs::MetricEstimates& m) {
  return std::string(label) + " fwer=" + fmt(m.fwer) + " fdr=" + fmt(m.fdr) + " power=" + fmt(m.power) +
         " recall=" + fmt(m.mean_recall);
}

// 1. Matcher weight equals brute-force enumeration.
Verdict matching_oracle() {
  int cases = 0, mismatches = 0;
  double worst = 0;
  const int sizes[] = {4, 6, 8, 10};
  const int dims[] = {1, 2, 5};
  for (int c = 0; c < 200; ++c) {
    const int n = sizes[c % 4];
    const int dim = dims[(c / 4) % 3];
    std::mt19937_64 rng(gfs::derive_seed(101, static_cast<std::uint64_t>(c)));
    std::normal_distribution<double> z;
    gfs::Matrix p(n, dim);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < dim; ++j) p(i, j) = z(rng);
    gfs::Matrix d(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d(i, j) = oracle::euclid(p, i, j);
    const auto m = gfs::min_weight_perfect_matching(d);
    const double brute = oracle::brute_matching_weight(d);
    const double rel = std::abs(m.total_weight - brute) / std::max(1e-300, brute);
    worst = std::max(worst, rel);
    mismatches += rel > 1e-9;
    ++cases;
  }
  return {mismatches == 0, std::to_string(cases) + " point sets, max relative gap " + sci(worst)};
}

void compositions(int total, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int first = 1; first <= total - (parts - 1); ++first) {
    cur.push_back(first);
    compositions(total - first, parts - 1, cur, out);
    cur.pop_back();
  }
}

// 2. Closed-form null moments equal exhaustive enumeration.
Verdict moment_oracle() {
  int comps = 0, failures = 0;
  double worst = 0;
  for (int n : {4, 6, 8}) {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; i += 2) pairs.emplace_back(i, i + 1);
    for (int k = 2; k <= n; ++k) {
      std::vector<std::vector<int>> all;
      std::vector<int> cur;
      compositions(n, k, cur, all);
      for (const auto& sizes : all) {
        const auto [mean, cov] = oracle::enumerate_moments(sizes, pairs);
        const auto mom = gfs::null_moments(sizes, n / 2);
        const double em = (mom.mean - mean).cwiseAbs().maxCoeff() / std::max(1e-300, mean.cwiseAbs().maxCoeff());
        const double ec = (mom.covariance - cov).cwiseAbs().maxCoeff() / std::max(1e-300, cov.cwiseAbs().maxCoeff());
        worst = std::max({worst, em, ec});
        failures += em > 1e-10 || ec > 1e-10;
        ++comps;
      }
    }
  }
  return {failures == 0, std::to_string(comps) + " compositions, max relative error " + sci(worst)};
}

// 3. Level of the global test under the null.
Verdict null_calibration() {
  const int reps = 500;
  std::vector<double> p_chi(reps), p_perm(reps);
  const std::vector<int> sizes(5, 40);
  gfs::parallel_for(static_cast<std::size_t>(reps), workers(), [&](std::size_t r) {
    const auto sim = gfs::gen_location(10, 0, 0.0, 5, sizes, gfs::derive_seed(303, r));
    gfs::TestConfig cfg;
    cfg.seed = r + 1;
    p_chi[r] = gfs::mmcm_test(sim.data, gfs::FeatureSubset::all(10), cfg).p_value;
    cfg.calibration = gfs::Calibration::permutation;
    cfg.permutations = 999;
    p_perm[r] = gfs::mmcm_test(sim.data, gfs::FeatureSubset::all(10), cfg).p_value;
  });
  auto rate = [&](const std::vector<double>& p) {
    return std::count_if(p.begin(), p.end(), [](double x) { return x <= 0.05; }) / static_cast<double>(reps);
  };
  const double rc = rate(p_chi), rp = rate(p_perm);
  const bool ok = rc >= 0.02 && rc <= 0.09 && rp >= 0.03 && rp <= 0.08;
  return {ok, "P(p<=0.05): chisq " + fmt(rc, 3) + " (need [0.02,0.09]), perm " + fmt(rp, 3) + " (need [0.03,0.08])"};
}

Verdict trend(gfs::Design design, const std::vector<double>& thetas, double fwer_cap) {
  std::vector<gfs::MetricEstimates> m;
  std::string detail;
  for (double th : thetas) {
    gfs::DesignPoint p;
    p.design = design;
    p.d = 40;
    p.s = 10;
    p.k = 5;
    p.class_size = 100;
    p.theta = th;
    const auto r = gfs::run_design_point(p, settings(50, false));
    m.push_back(*r.gfs);
    detail += (detail.empty() ? "" : "; ") + std::string("theta=") + fmt(th, 2) + " " + metrics_line("", *r.gfs);
  }
  bool ok = true;
  for (std::size_t i = 0; i + 1 < m.size(); ++i) ok = ok && m[i + 1].power >= m[i].power;
  for (const auto& x : m) ok = ok && x.fdr <= x.fwer;
  ok = ok && m.back().power >= 0.9 && m.back().fwer <= fwer_cap;
  return {ok, detail};
}

// 6. Cross-family: heavy-tailed classes against the Gaussian one.
Verdict cross_family() {
  gfs::DesignPoint p;
  p.design = gfs::Design::cross_family;
  p.d = 50;
  p.k = 3;
  p.class_size = 150;
  p.t_dof = 7;
  const auto r = gfs::run_design_point(p, settings(30, true));
  const bool ok = r.gfs->power >= 0.3 && r.kw->power <= 0.05;
  return {ok, metrics_line("gfs", *r.gfs) + "; " + metrics_line("kw", *r.kw) + " (need gfs power>=0.3, kw power<=0.05)"};
}

// 7. Scale-only change in the dependent design.
Verdict scale_blindness() {
  gfs::DesignPoint p;
  p.design = gfs::Design::dependent;
  p.d = 30;
  p.s = 8;
  p.k = 5;
  p.class_size = 100;
  p.theta = 0;
  p.phi = 15;
  p.rho = 0.1;
  const auto r = gfs::run_design_point(p, settings(30, true));
  const bool ok = r.kw->power <= 0.05 && r.gfs->power >= 0.3;
  return {ok, metrics_line("gfs", *r.gfs) + "; " + metrics_line("kw", *r.kw) + " (need kw power<=0.05, gfs power>=0.3)"};
}

// 8. Family-wise error on a partial-null location design.
Verdict fwer_bound() {
  gfs::DesignPoint p;
  p.design = gfs::Design::location;
  p.d = 40;
  p.s = 5;
  p.k = 5;
  p.class_size = 100;
  p.theta = 0.5;
  auto s = settings(300, false);
  s.seed = 808;
  const auto r = gfs::run_design_point(p, s);
  return {r.gfs->fwer <= 0.10, metrics_line("gfs", *r.gfs) + " over 300 replicates (need fwer<=0.10)"};
}

gfs::ClusterTree tree_from_shape(const oracle::TreeShape& shape, int d) {
  std::vector<std::pair<int, int>> merges;
  auto build = [&](auto&& self, const oracle::TreeShape& t) -> int {
    if (t.children.empty()) return t.features[0];
    const int l = self(self, t.children[0]);
    const int r = self(self, t.children[1]);
    merges.emplace_back(l, r);
    return d + static_cast<int>(merges.size()) - 1;
  };
  build(build, shape);
  return gfs::ClusterTree::from_merges(d, merges);
}

// 9. Stubbed p-values: the recursion returns the brute-force terminal union.
Verdict structural_suite() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int trees = 0, assignments = 0, failures = 0, double_tests = 0;
  for (int d = 1; d <= 5; ++d) {
    std::vector<int> feats(static_cast<std::size_t>(d));
    std::iota(feats.begin(), feats.end(), 0);
    for (const auto& shape : oracle::all_trees(feats)) {
      const auto t = tree_from_shape(shape, d);
      std::vector<std::vector<int>> nf;
      std::vector<int> parent;
      std::vector<std::vector<int>> children;
      for (int id = 0; id < t.size(); ++id) {
        const auto& n = t.node(id);
        nf.push_back(n.features.indices());
        parent.push_back(n.parent);
        children.push_back(n.is_leaf() ? std::vector<int>{} : std::vector<int>{n.left, n.right});
      }
      ++trees;
      for (int a = 0; a < 150; ++a, ++assignments) {
        std::vector<double> raw(nf.size()), adj(nf.size());
        for (std::size_t c = 0; c < raw.size(); ++c) {
          raw[c] = u(rng) < 0.6 ? u(rng) * 0.02 : u(rng);
          adj[c] = std::min(1.0, raw[c] * d / static_cast<double>(nf[c].size()));
        }
        std::vector<int> calls(nf.size(), 0);
        const auto r = gfs::gfs_select(t, 0.05, [&](int id, const gfs::FeatureSubset&) {
          ++calls[static_cast<std::size_t>(id)];
          return gfs::NodeTestResult{raw[static_cast<std::size_t>(id)]};
        });
        const auto expect = oracle::brute_terminal_union(nf, parent, children, adj, 0.05);
        failures += std::set<int>(r.selected.begin(), r.selected.end()) != expect;
        double_tests += std::count_if(calls.begin(), calls.end(), [](int c) { return c > 1; });
      }
    }
  }
  return {failures == 0 && double_tests == 0 && assignments >= 100 * trees,
          std::to_string(trees) + " trees, " + std::to_string(assignments) + " assignments, " +
              std::to_string(failures) + " mismatches, " + std::to_string(double_tests) + " repeated tests"};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + GFS_CLI + "\" " + args + " 2>/dev/null";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

// 10. CSV output does not depend on the worker count.
Verdict determinism() {
  testutil::TempDir dir("acc");
  const std::vector<std::string> commands{
      "simulate --design location --d 12,20 --s 3 --k 4 --class-size 30 --theta 0.3,0.6 --replicates 6 --seed 7",
      "simulate --design scale --d 10 --s 3 --k 3 --class-size 30 --theta 5 --replicates 6 --seed 8 "
      "--calibration perm --permutations 99",
      "benchmark --design dependent --d 10 --s 3 --k 3 --class-size 30 --theta 0 --phi 0,10 --rho 0.1 "
      "--replicates 6 --seed 9",
      "benchmark --design cross-family --d 12 --class-size 30 --replicates 6 --seed 10"};
  int identical = 0;
  std::string detail;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::string first;
    bool same = true;
    for (unsigned w : {1u, 2u, 4u}) {
      const auto out = dir.file("run" + std::to_string(c) + "_" + std::to_string(w) + ".csv");
      if (run_cli(commands[c] + " --workers " + std::to_string(w) + " --out " + out) != 0) {
        same = false;
        break;
      }
      const auto text = testutil::read_text(out);
      if (w == 1u)
        first = text;
      else
        same = same && text == first && !text.empty();
    }
    identical += same;
  }
  return {identical == static_cast<int>(commands.size()),
          std::to_string(identical) + "/" + std::to_string(commands.size()) +
              " commands byte-identical across 1, 2 and 4 workers"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "matching oracle equivalence", 10, matching_oracle},
      {2, "null-moment oracle equivalence", 30, moment_oracle},
      {3, "null calibration of the global test", 600, null_calibration},
      {4, "location trend", 1800,
       [] { return trend(gfs::Design::location, {0.2, 0.45, 0.75}, 0.12); }},
      {5, "scale trend", 1800, [] { return trend(gfs::Design::scale, {2, 8, 15}, 0.15); }},
      {6, "cross-family comparison", 1200, cross_family},
      {7, "Kruskal-Wallis scale blindness", 1200, scale_blindness},
      {8, "family-wise error bound", 0, fwer_bound},
      {9, "recursion against brute-force terminal sets", 0, structural_suite},
      {10, "worker-count determinism", 0, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0, ran = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.time_limit_s > 0 && secs >= c.time_limit_s) {
      v.pass = false;
      v.detail += " [time limit " + fmt(c.time_limit_s, 0) + " s exceeded]";
    }
    std::cout << "AC" << c.id << ' ' << (v.pass ? "PASS" : "FAIL") << "  " << c.title << ": " << v.detail << " ("
              << fmt(secs, 1) << " s)" << std::endl;
    failed += !v.pass;
    ++ran;
  }
  std::cout << ran - failed << "/" << ran << " acceptance criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
