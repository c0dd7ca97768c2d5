#pragma once

#include "gfs/clustering.hpp"
#include "gfs/crossmatch.hpp"
#include "gfs/dataset.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gfs {

enum class Design { location, scale, dependent, cross_family };

std::string to_string(Design d);
Design parse_design(const std::string& s);

/// Parameters of one simulated configuration.
struct DesignPoint {
  Design design = Design::location;
  int d = 100;
  int s = 25;              // signal size; cross-family uses ceil(d / 4)
  int k = 5;
  int class_size = 200;
  double theta = 0.0;      // mean step (location, dependent) or variance step (scale)
  double phi = 0.0;        // variance step on the signal block (dependent)
  double rho = 0.0;        // base correlation (dependent)
  double t_dof = 7.0;      // t family (cross-family)
};

struct SignalSpec {
  std::vector<int> signal_set;  // 0-based, sorted
  DesignPoint point;
};

struct SimulatedData {
  LabeledDataset data;
  SignalSpec spec;
};

/// Class i (1-based) ~ N(i * mu, I) with mu = theta on a random s-subset.
SimulatedData gen_location(int d, int s, double theta, int k, std::span<const int> class_sizes, std::uint64_t seed);

/// Class i ~ N(0, Sigma_i), Sigma_i diagonal with 1 + (i - 1) theta on a
/// random s-subset and 1 elsewhere.
SimulatedData gen_scale(int d, int s, double theta, int k, std::span<const int> class_sizes, std::uint64_t seed);

/// Class i ~ N(mu_i, Sigma_i): mu_i = i theta on L; Sigma_i has unit
/// diagonal and rho off the diagonal except on the L block, where both are
/// inflated by 1 + (i - 1) phi. Throws InputError if some Sigma_i is not
/// positive definite.
SimulatedData gen_dependent(int d, int s, double theta, double phi, double rho, int k,
                            std::span<const int> class_sizes, std::uint64_t seed);

/// Three classes; the first ceil(d / 4) coordinates are independent
/// standard Gaussian, Cauchy and Student-t draws for classes 1, 2, 3; the
/// rest are standard Gaussian in every class.
SimulatedData gen_cross_family(int d, std::span<const int> class_sizes, double t_dof, std::uint64_t seed);

/// Dispatches on point.design with equal class sizes.
SimulatedData generate(const DesignPoint& point, std::uint64_t seed);

struct MetricEstimates {
  double fwer = 0.0;
  double fdr = 0.0;
  double power = 0.0;
  double mean_recall = 0.0;  // mean |S ∩ L| / |L|
  double mean_selected = 0.0;
  int replicates = 0;
  std::vector<std::vector<int>> selected;
};

/// Empirical rates over replicates sharing one signal set.
MetricEstimates estimate_metrics(const std::vector<std::vector<int>>& selected, const std::vector<int>& signal);

/// Empirical rates with a signal set per replicate.
MetricEstimates estimate_metrics(const std::vector<std::vector<int>>& selected,
                                 const std::vector<std::vector<int>>& signals);

/// Kruskal-Wallis H with mid-rank tie correction; p from the chi-square
/// upper tail with K - 1 degrees of freedom. All values tied gives p = 1.
double kruskal_wallis(const LabeledDataset& data, int feature);

/// Features whose Bonferroni-adjusted p-value min(1, d p) is at most alpha.
std::vector<int> kw_select(const LabeledDataset& data, double alpha);

struct SimulationSettings {
  double alpha = 0.05;
  int replicates = 100;
  std::uint64_t seed = 1;
  Correlation dissimilarity = Correlation::pearson;
  TestConfig test;
  unsigned workers = 1;
  bool run_gfs = true;
  bool run_kw = false;
};

struct PointResult {
  DesignPoint point;
  std::optional<MetricEstimates> gfs;
  std::optional<MetricEstimates> kw;
  double runtime_seconds = 0.0;
};

/// Runs every replicate of one design point. Replicate r uses seed
/// derive_seed(settings.seed, r) for every point, so grid points share
/// their random inputs.
PointResult run_design_point(const DesignPoint& point, const SimulationSettings& settings);

}  // namespace gfs
