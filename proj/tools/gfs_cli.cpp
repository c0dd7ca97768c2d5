// Batch front end: select, test, tree, simulate, benchmark.

#include "gfs/clustering.hpp"
#include "gfs/crossmatch.hpp"
#include "gfs/dataset.hpp"
#include "gfs/evaluation.hpp"
#include "gfs/parallel.hpp"
#include "gfs/report.hpp"
#include "gfs/selection.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kInput = 3, kRuntime = 4 };

struct DataArgs {
  std::string input;
  std::string label_col;
  std::string delimiter = ",";
  std::vector<std::string> drop;
  bool binarize = false;
  std::string header = "auto";
};

struct TestArgs {
  std::string calibration = "chisq";
  int permutations = 1000;
  int match_cap = 5000;
  std::uint64_t seed = 1;
  unsigned workers = gfs::default_workers();
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--input", a.input, "Delimited data file")->required();
  cmd->add_option("--label-col", a.label_col, "Label column (header name or 1-based number)")->required();
  cmd->add_option("--delimiter", a.delimiter, "Field delimiter")->capture_default_str();
  cmd->add_option("--drop", a.drop, "Columns to ignore (names or 1-based numbers)")->delimiter(',');
  cmd->add_flag("--binarize", a.binarize, "Binarize a numeric label into zero / positive");
  cmd->add_option("--header", a.header, "First row is a header: auto, yes or no")
      ->check(CLI::IsMember({"auto", "yes", "no"}))
      ->capture_default_str();
}

void add_test_options(CLI::App* cmd, TestArgs& t) {
  cmd->add_option("--calibration", t.calibration, "chisq or perm")
      ->check(CLI::IsMember({"chisq", "perm"}))
      ->capture_default_str();
  cmd->add_option("--permutations", t.permutations, "Permutations B for perm calibration")
      ->check(CLI::Range(1, 100000000))
      ->capture_default_str();
  cmd->add_option("--match-cap", t.match_cap, "Largest pooled sample handed to the matcher")
      ->check(CLI::Range(2, 100000))
      ->capture_default_str();
  cmd->add_option("--seed", t.seed, "Master random seed")->capture_default_str();
  cmd->add_option("--workers", t.workers, "Worker threads")->check(CLI::Range(1u, 4096u));
}

gfs::LabeledDataset load(const DataArgs& a) {
  if (a.delimiter.size() != 1) throw gfs::InputError("delimiter must be a single character");
  gfs::LoadOptions opts;
  opts.label_column = a.label_col;
  opts.delimiter = a.delimiter[0];
  opts.drop_columns = a.drop;
  if (a.header != "auto") opts.has_header = a.header == "yes";
  opts.label_rule = a.binarize ? gfs::LabelRule::zero_vs_positive : gfs::LabelRule::as_is;
  return gfs::load_dataset(a.input, opts);
}

gfs::TestConfig make_test_config(const TestArgs& t) {
  gfs::TestConfig cfg;
  cfg.calibration = gfs::parse_calibration(t.calibration);
  cfg.permutations = t.permutations;
  cfg.seed = t.seed;
  cfg.matching.max_points = t.match_cap;
  cfg.workers = t.workers;
  return cfg;
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-")
    std::cout << content;
  else
    gfs::write_file_atomic(path, content);
}

std::string names_of(const std::vector<int>& features, const std::vector<std::string>& names) {
  std::string out;
  for (int f : features) out += (out.empty() ? "" : ", ") + names[static_cast<std::size_t>(f)] + " (" + std::to_string(f + 1) + ")";
  return out.empty() ? "(none)" : out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-based feature selection with the multisample crossmatch test"};
  app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
  app.require_subcommand(1);

  // select
  DataArgs sel_data;
  TestArgs sel_test;
  double sel_alpha = 0.05;
  std::string sel_dissim = "pearson";
  std::string sel_out = "gfs_selection";
  int boot_iters = 0;
  int boot_subsample = 0;
  int groups = 0;
  double rho_start = 0.5;
  double rho_step = 0.05;
  auto* select = app.add_subcommand("select", "Select features with the hierarchical crossmatch procedure");
  add_data_options(select, sel_data);
  add_test_options(select, sel_test);
  select->add_option("--alpha", sel_alpha, "Level")->check(CLI::Range(1e-12, 1.0 - 1e-12))->capture_default_str();
  select->add_option("--dissimilarity", sel_dissim, "Correlation used for the feature tree")
      ->check(CLI::IsMember({"pearson", "spearman"}))
      ->capture_default_str();
  select->add_option("--out", sel_out, "Output prefix: <out>.json and <out>.selected.csv")->capture_default_str();
  select->add_option("--bootstrap-iters", boot_iters, "Bootstrap iterations (0 disables)")
      ->check(CLI::Range(0, 10000000));
  select->add_option("--subsample", boot_subsample, "Rows per class in each bootstrap draw (0 = smallest class)")
      ->check(CLI::Range(0, 100000000));
  select->add_option("--groups", groups, "Pivot groups for bootstrap mode (0 = one tree)")->check(CLI::Range(0, 100000));
  select->add_option("--rho-start", rho_start, "Initial neighbourhood correlation")->check(CLI::Range(-1.0, 1.0));
  select->add_option("--rho-step", rho_step, "Neighbourhood correlation decrement")->check(CLI::Range(1e-6, 2.0));

  // test
  DataArgs test_data;
  TestArgs test_test;
  std::vector<int> test_features;
  std::string test_out;
  auto* test = app.add_subcommand("test", "Global K-sample crossmatch test");
  add_data_options(test, test_data);
  add_test_options(test, test_test);
  test->add_option("--features", test_features, "1-based feature indices to test (default: all)")->delimiter(',');
  test->add_option("--out", test_out, "Output JSON path (default: standard output)");

  // tree
  DataArgs tree_data;
  std::string tree_dissim = "pearson";
  std::string tree_format = "json";
  std::string tree_out;
  auto* tree = app.add_subcommand("tree", "Build and export the single-linkage feature tree");
  add_data_options(tree, tree_data);
  tree->add_option("--dissimilarity", tree_dissim)->check(CLI::IsMember({"pearson", "spearman"}))->capture_default_str();
  tree->add_option("--format", tree_format)->check(CLI::IsMember({"json", "newick"}))->capture_default_str();
  tree->add_option("--out", tree_out, "Output path (default: standard output)");

  // simulate / benchmark share their options.
  struct SimArgs {
    std::string design = "location";
    std::vector<int> d{100};
    int s = 25;
    int k = 5;
    int class_size = 200;
    std::vector<double> theta{0.5};
    std::vector<double> phi{0.0};
    double rho = 0.1;
    double t_dof = 7.0;
    int replicates = 100;
    double alpha = 0.05;
    std::string dissim = "pearson";
    std::string out = "-";
    bool timing = false;
    TestArgs test;
  };
  SimArgs sim_args, bench_args;
  auto add_sim = [](CLI::App* cmd, SimArgs& s) {
    cmd->add_option("--design", s.design)
        ->check(CLI::IsMember({"location", "scale", "dependent", "cross-family"}))
        ->capture_default_str();
    cmd->add_option("--d", s.d, "Dimensions (grid axis)")->delimiter(',')->check(CLI::Range(1, 100000));
    cmd->add_option("--s", s.s, "Signal size")->check(CLI::Range(0, 100000));
    cmd->add_option("--k", s.k, "Classes")->check(CLI::Range(2, 1000));
    cmd->add_option("--class-size", s.class_size)->check(CLI::Range(1, 1000000));
    cmd->add_option("--theta", s.theta, "Location/scale step (grid axis)")->delimiter(',')->check(CLI::NonNegativeNumber);
    cmd->add_option("--phi", s.phi, "Signal-block variance step (grid axis)")->delimiter(',')->check(CLI::NonNegativeNumber);
    cmd->add_option("--rho", s.rho)->check(CLI::Range(-0.999999, 0.999999));
    cmd->add_option("--t-dof", s.t_dof)->check(CLI::Range(1e-6, 1e6));
    cmd->add_option("--replicates", s.replicates)->check(CLI::Range(1, 100000000));
    cmd->add_option("--alpha", s.alpha)->check(CLI::Range(1e-12, 1.0 - 1e-12));
    cmd->add_option("--dissimilarity", s.dissim)->check(CLI::IsMember({"pearson", "spearman"}));
    cmd->add_option("--out", s.out, "Metrics CSV path (default: standard output)");
    cmd->add_flag("--timing", s.timing, "Append a runtime column (not reproducible)");
    add_test_options(cmd, s.test);
  };
  auto* simulate = app.add_subcommand("simulate", "Estimate FWER, FDR and power of the selection on a design grid");
  add_sim(simulate, sim_args);
  auto* benchmark = app.add_subcommand("benchmark", "Compare the selection with per-feature Kruskal-Wallis + Bonferroni");
  add_sim(benchmark, bench_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*select) {
      const auto data = load(sel_data);
      const auto cfg = make_test_config(sel_test);
      const auto method = gfs::parse_correlation(sel_dissim);
      std::cerr << "loaded " << data.n() << " rows, " << data.d() << " features, " << data.k() << " groups\n";
      if (groups > 0 && boot_iters == 0) throw CLI::ValidationError("--groups requires --bootstrap-iters >= 1");
      if (boot_iters > 0) {
        gfs::BootstrapOptions bo;
        bo.iterations = boot_iters;
        bo.subsample_per_class = boot_subsample;
        bo.workers = sel_test.workers;
        gfs::BootstrapReport rep;
        if (groups > 0) {
          const auto fg = gfs::pivot_groups(data, groups, rho_start, rho_step);
          rep = gfs::bootstrap_select(data, fg, sel_alpha, cfg, bo, method);
        } else {
          const auto t = gfs::ClusterTree::single_linkage(gfs::correlation_dissimilarity(data, method));
          rep = gfs::bootstrap_select(data, t, sel_alpha, cfg, bo);
        }
        gfs::write_file_atomic(sel_out + ".json", gfs::to_json(rep, data.feature_names()).dump(2) + "\n");
        gfs::write_file_atomic(sel_out + ".selected.csv", gfs::selected_csv(rep.stable_set, data.feature_names()));
        std::cout << "stable features over " << rep.iterations << " iterations: "
                  << names_of(rep.stable_set, data.feature_names()) << "\n";
      } else {
        const auto t = gfs::ClusterTree::single_linkage(gfs::correlation_dissimilarity(data, method));
        const auto rep = gfs::gfs_select(data, t, sel_alpha, cfg);
        gfs::write_file_atomic(sel_out + ".json",
                               gfs::to_json(rep, data.feature_names(), data.group_names()).dump(2) + "\n");
        gfs::write_file_atomic(sel_out + ".selected.csv", gfs::selected_csv(rep.selected, data.feature_names()));
        int depth = 0;
        for (const auto& n : rep.trace) {
          int dd = 0;
          for (int id = n.node; t.node(id).parent >= 0; id = t.node(id).parent) ++dd;
          depth = std::max(depth, dd);
        }
        std::cout << "selected " << rep.selected.size() << " of " << data.d()
                  << " features: " << names_of(rep.selected, data.feature_names()) << "\n"
                  << "tests performed: " << rep.tests_performed << ", deepest tested node: depth " << depth << "\n";
      }
    } else if (*test) {
      const auto data = load(test_data);
      std::vector<int> feats;
      for (int f : test_features) feats.push_back(f - 1);
      const gfs::FeatureSubset subset = feats.empty() ? gfs::FeatureSubset::all(data.d()) : gfs::FeatureSubset(feats);
      const auto outcome = gfs::mmcm_test(data, subset, make_test_config(test_test));
      if (outcome.dropped_row)
        std::cerr << "odd sample size: dropped row " << *outcome.dropped_row + 1 << "\n";
      emit(test_out, gfs::to_json(outcome, data.group_names()).dump(2) + "\n");
    } else if (*tree) {
      const auto data = load(tree_data);
      const auto t = gfs::ClusterTree::single_linkage(
          gfs::correlation_dissimilarity(data, gfs::parse_correlation(tree_dissim)));
      emit(tree_out, tree_format == "json" ? t.to_json(data.feature_names()).dump(2) + "\n"
                                           : t.to_newick(data.feature_names()) + "\n");
    } else {
      const bool is_bench = static_cast<bool>(*benchmark);
      const SimArgs& s = is_bench ? bench_args : sim_args;
      gfs::SimulationSettings settings;
      settings.alpha = s.alpha;
      settings.replicates = s.replicates;
      settings.seed = s.test.seed;
      settings.dissimilarity = gfs::parse_correlation(s.dissim);
      settings.test = make_test_config(s.test);
      settings.workers = s.test.workers;
      settings.run_gfs = true;
      settings.run_kw = is_bench;
      const auto design = gfs::parse_design(s.design);
      std::vector<gfs::DesignPoint> grid;
      for (int d : s.d)
        for (double th : s.theta)
          for (double ph : s.phi) {
            gfs::DesignPoint p;
            p.design = design;
            p.d = d;
            p.s = design == gfs::Design::cross_family ? (d + 3) / 4 : s.s;
            p.k = design == gfs::Design::cross_family ? 3 : s.k;
            p.class_size = s.class_size;
            p.theta = th;
            p.phi = ph;
            p.rho = s.rho;
            p.t_dof = s.t_dof;
            if (p.s > p.d) throw gfs::InputError("signal size exceeds d = " + std::to_string(d));
            grid.push_back(p);
          }
      std::string csv = gfs::metrics_csv_header(s.timing);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto res = gfs::run_design_point(grid[i], settings);
        std::cerr << "[" << i + 1 << "/" << grid.size() << "] " << gfs::to_string(grid[i].design)
                  << " d=" << grid[i].d << " theta=" << grid[i].theta << " phi=" << grid[i].phi << " done in "
                  << res.runtime_seconds << " s\n";
        csv += gfs::metrics_csv_rows(res, settings, s.timing);
      }
      emit(s.out, csv);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const gfs::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
