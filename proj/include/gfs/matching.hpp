#pragma once

#include "gfs/dataset.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace gfs {

/// A perfect matching over the retained points. Pair endpoints and
/// `retained` use the caller's row indices; each pair is stored (low, high)
/// and the list is sorted.
struct Matching {
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> retained;
  double total_weight = 0.0;
};

struct MatchingOptions {
  /// Hard cap on the number of points handed to the matcher.
  int max_points = 5000;
  /// Swap equal-weight edge pairs towards the lexicographically smallest
  /// pair list. Only two-edge exchanges are examined.
  bool canonicalize = true;
};

/// Euclidean distances between the rows of `points`.
Matrix pairwise_distances(const Matrix& points);

/// Euclidean distances between the given rows of `data`, restricted to the
/// columns in `features`.
Matrix pairwise_distances(const Matrix& data, const std::vector<int>& rows, const std::vector<int>& features);

/// Exact minimum-weight perfect matching on a complete graph (Edmonds'
/// blossom algorithm with integer duals, O(n^3)). `dist` must be square,
/// symmetric, finite and non-negative with an even dimension >= 2.
Matching min_weight_perfect_matching(const Matrix& dist, const MatchingOptions& options = {});

/// Rows kept when an odd pooled sample loses one point.
struct Retention {
  std::vector<int> retained;
  std::optional<int> dropped;
};

/// Identity for even n; for odd n drops one index drawn uniformly from a
/// generator seeded with `seed`.
Retention handle_odd(int n, std::uint64_t seed);

/// Sum of distances over a pair list.
double matching_weight(const Matrix& dist, const std::vector<std::pair<int, int>>& pairs);

}  // namespace gfs
