#pragma once

#include "gfs/dataset.hpp"
#include "gfs/matching.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gfs {

/// Position of the unordered group pair {i, j} (0-based, i != j) in the
/// row-major enumeration (0,1), (0,2), ..., (K-2,K-1).
int pair_index(int i, int j, int k);
int pair_count(int k);

/// Number of matched pairs joining each pair of groups.
struct CrossCounts {
  int k = 0;
  std::vector<long> counts;  // indexed by pair_index
  long pair_total = 0;

  long at(int i, int j) const { return counts[static_cast<std::size_t>(pair_index(i, j, k))]; }
};

/// Mean and covariance of the cross-count vector when labels are assigned
/// uniformly at random to a fixed perfect matching.
struct NullMoments {
  Eigen::VectorXd mean;
  Matrix covariance;
};

enum class Calibration { chi_square, permutation };

std::string to_string(Calibration c);
Calibration parse_calibration(const std::string& s);

struct TestOutcome {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  Calibration mode = Calibration::chi_square;
  int permutations_used = 0;
  CrossCounts counts;
  std::optional<int> dropped_row;
};

/// `labels` holds a 0-based group per row of the matched data set; every
/// retained index must address it.
CrossCounts cross_counts(const Matching& matching, std::span<const int> labels, int k);

/// Closed-form moments. Group sizes may contain zeros (a group emptied by
/// odd-size handling) but must sum to 2 * pair_total.
NullMoments null_moments(std::span<const int> group_sizes, long pair_total);

/// Quadratic form of the centred counts in the Moore-Penrose pseudoinverse
/// of the covariance. Fills statistic and dof only.
TestOutcome mmcm_statistic(const CrossCounts& counts, const NullMoments& moments);

/// Upper tail of the chi-square distribution.
double p_value_chisq(double statistic, int dof);

/// Precomputed quadratic form for repeated evaluation on relabelled counts.
class MmcmForm {
 public:
  explicit MmcmForm(const NullMoments& moments);
  int rank() const { return rank_; }
  double operator()(std::span<const long> counts) const;

 private:
  Eigen::VectorXd mean_;
  Matrix pinv_;
  int rank_ = 0;
};

/// Add-one permutation p-value: labels of the retained points are shuffled
/// uniformly B times over the same matching. Permutation b draws from
/// substream b of `seed`, so the result does not depend on `workers`.
double p_value_permutation(const Matching& matching, std::span<const int> labels, int k, int permutations,
                           std::uint64_t seed, unsigned workers = 1);

struct TestConfig {
  Calibration calibration = Calibration::chi_square;
  int permutations = 1000;
  std::uint64_t seed = 1;
  MatchingOptions matching;
  unsigned workers = 1;
};

/// Global K-sample test of `data` restricted to `features`. `stream` selects
/// the random substream (odd-size drop and permutations) under config.seed.
TestOutcome mmcm_test(const LabeledDataset& data, const FeatureSubset& features, const TestConfig& config,
                      std::uint64_t stream = 0);

}  // namespace gfs
