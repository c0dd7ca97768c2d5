#include "gfs/crossmatch.hpp"

#include "gfs/parallel.hpp"
#include "gfs/random.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gfs {

int pair_count(int k) { return k * (k - 1) / 2; }

int pair_index(int i, int j, int k) {
  if (i > j) std::swap(i, j);
  if (i == j || i < 0 || j >= k) throw std::out_of_range("invalid group pair");
  // Pairs before row i: (k-1) + (k-2) + ... + (k-i).
  return i * (2 * k - i - 1) / 2 + (j - i - 1);
}

std::string to_string(Calibration c) { return c == Calibration::chi_square ? "chisq" : "perm"; }

Calibration parse_calibration(const std::string& s) {
  if (s == "chisq" || s == "chi-square" || s == "chi_square") return Calibration::chi_square;
  if (s == "perm" || s == "permutation") return Calibration::permutation;
  throw InputError("unknown calibration '" + s + "' (expected chisq or perm)");
}

CrossCounts cross_counts(const Matching& matching, std::span<const int> labels, int k) {
  if (k < 2) throw InputError("cross counts need K >= 2");
  CrossCounts out;
  out.k = k;
  out.counts.assign(static_cast<std::size_t>(pair_count(k)), 0);
  out.pair_total = static_cast<long>(matching.pairs.size());
  auto label_of = [&](int row) {
    if (row < 0 || static_cast<std::size_t>(row) >= labels.size())
      throw InputError("matched row " + std::to_string(row) + " has no label");
    const int l = labels[static_cast<std::size_t>(row)];
    if (l < 0 || l >= k) throw InputError("label outside 0..K-1");
    return l;
  };
  for (int r : matching.retained) label_of(r);
  if (matching.pairs.size() * 2 != matching.retained.size())
    throw InputError("matching pairs do not cover the retained points");
  for (auto [a, b] : matching.pairs) {
    const int la = label_of(a);
    const int lb = label_of(b);
    if (la != lb) ++out.counts[static_cast<std::size_t>(pair_index(la, lb, k))];
  }
  return out;
}

NullMoments null_moments(std::span<const int> group_sizes, long pair_total) {
  const int k = static_cast<int>(group_sizes.size());
  if (k < 2) throw InputError("null moments need K >= 2");
  long total = 0;
  for (int s : group_sizes) {
    if (s < 0) throw InputError("negative group size");
    total += s;
  }
  if (pair_total < 1 || total != 2 * pair_total)
    throw InputError("group sizes sum to " + std::to_string(total) + ", expected 2 x " + std::to_string(pair_total));

  using real = long double;
  const real N = static_cast<real>(total);
  const real m = static_cast<real>(pair_total);
  const int p = pair_count(k);

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) pairs.emplace_back(i, j);

  auto n_of = [&](int g) { return static_cast<real>(group_sizes[static_cast<std::size_t>(g)]); };
  std::vector<real> p1(static_cast<std::size_t>(p));
  for (int a = 0; a < p; ++a) {
    auto [i, j] = pairs[static_cast<std::size_t>(a)];
    p1[static_cast<std::size_t>(a)] = 2 * n_of(i) * n_of(j) / (N * (N - 1));
  }

  NullMoments out;
  out.mean.resize(p);
  out.covariance.resize(p, p);
  for (int a = 0; a < p; ++a) out.mean(a) = static_cast<double>(m * p1[static_cast<std::size_t>(a)]);

  const real falling4 = N * (N - 1) * (N - 2) * (N - 3);
  std::vector<int> uses(static_cast<std::size_t>(k));
  for (int a = 0; a < p; ++a)
    for (int b = a; b < p; ++b) {
      // Two distinct matched edges labelled {i,j} and {k,l}: 2 x 2 ordered
      // endpoint assignments, each with probability prod (n_g)_{c_g} / (N)_4.
      real p2 = 0;
      if (pair_total >= 2) {
        std::fill(uses.begin(), uses.end(), 0);
        auto [i, j] = pairs[static_cast<std::size_t>(a)];
        auto [u, v] = pairs[static_cast<std::size_t>(b)];
        for (int g : {i, j, u, v}) ++uses[static_cast<std::size_t>(g)];
        real prod = 1;
        for (int g = 0; g < k; ++g)
          for (int t = 0; t < uses[static_cast<std::size_t>(g)]; ++t) prod *= n_of(g) - t;
        p2 = 4 * prod / falling4;
      }
      const real pa = p1[static_cast<std::size_t>(a)];
      const real pb = p1[static_cast<std::size_t>(b)];
      real cov = m * (m - 1) * p2 - m * m * pa * pb;
      if (a == b) cov += m * pa;
      out.covariance(a, b) = out.covariance(b, a) = static_cast<double>(cov);
    }
  return out;
}

MmcmForm::MmcmForm(const NullMoments& moments) : mean_(moments.mean) {
  const auto p = moments.covariance.rows();
  if (moments.covariance.cols() != p || mean_.size() != p) throw InputError("null moment dimensions disagree");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(moments.covariance);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double spectral = ev.cwiseAbs().maxCoeff();
  if (ev.minCoeff() < -1e-10 * spectral) throw std::runtime_error("null covariance is not positive semidefinite");
  const double cutoff = 1e-10 * spectral;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < p; ++i)
    if (spectral > 0 && ev(i) > cutoff) {
      inv(i) = 1.0 / ev(i);
      ++rank_;
    }
  pinv_ = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

double MmcmForm::operator()(std::span<const long> counts) const {
  if (static_cast<Eigen::Index>(counts.size()) != mean_.size()) throw InputError("cross-count dimension mismatch");
  Eigen::VectorXd r(mean_.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = static_cast<double>(counts[static_cast<std::size_t>(i)]) - mean_(i);
  return std::max(0.0, r.dot(pinv_ * r));
}

TestOutcome mmcm_statistic(const CrossCounts& counts, const NullMoments& moments) {
  MmcmForm form(moments);
  TestOutcome out;
  out.counts = counts;
  out.statistic = form(counts.counts);
  out.dof = form.rank();
  return out;
}

double p_value_chisq(double statistic, int dof) {
  if (dof < 1) throw InputError("chi-square tail needs dof >= 1");
  if (!(statistic >= 0)) throw InputError("chi-square statistic must be non-negative");
  if (statistic == 0) return 1.0;
  if (std::isinf(statistic)) return 0.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

double p_value_permutation(const Matching& matching, std::span<const int> labels, int k, int permutations,
                           std::uint64_t seed, unsigned workers) {
  if (permutations < 1) throw InputError("permutation count must be >= 1");
  const CrossCounts observed = cross_counts(matching, labels, k);

  std::vector<int> base;  // labels of retained points, by position
  std::vector<int> position(labels.size(), -1);
  for (std::size_t i = 0; i < matching.retained.size(); ++i) {
    position[static_cast<std::size_t>(matching.retained[i])] = static_cast<int>(i);
    base.push_back(labels[static_cast<std::size_t>(matching.retained[i])]);
  }
  std::vector<std::pair<int, int>> pos_pairs;
  for (auto [a, b] : matching.pairs)
    pos_pairs.emplace_back(position[static_cast<std::size_t>(a)], position[static_cast<std::size_t>(b)]);

  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int l : base) ++sizes[static_cast<std::size_t>(l)];
  const MmcmForm form(null_moments(sizes, observed.pair_total));
  const double t_obs = form(observed.counts);
  const double tol = 1e-9 * std::max(1.0, t_obs);

  std::vector<char> exceed(static_cast<std::size_t>(permutations), 0);
  parallel_for(static_cast<std::size_t>(permutations), workers, [&](std::size_t b) {
    Rng rng = make_rng(seed, b + 1);
    std::vector<int> shuffled = base;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::vector<long> counts(static_cast<std::size_t>(pair_count(k)), 0);
    for (auto [x, y] : pos_pairs) {
      const int lx = shuffled[static_cast<std::size_t>(x)];
      const int ly = shuffled[static_cast<std::size_t>(y)];
      if (lx != ly) ++counts[static_cast<std::size_t>(pair_index(lx, ly, k))];
    }
    exceed[b] = form(counts) >= t_obs - tol;
  });
  const auto hits = std::count(exceed.begin(), exceed.end(), 1);
  return static_cast<double>(1 + hits) / static_cast<double>(permutations + 1);
}

TestOutcome mmcm_test(const LabeledDataset& data, const FeatureSubset& features, const TestConfig& config,
                      std::uint64_t stream) {
  features.check_against(data.d());
  const std::uint64_t seed = derive_seed(config.seed, stream);
  const Retention kept = handle_odd(data.n(), seed);
  const Matrix dist = pairwise_distances(data.values(), kept.retained, features.indices());
  Matching local = min_weight_perfect_matching(dist, config.matching);

  Matching matching;
  matching.retained = kept.retained;
  matching.total_weight = local.total_weight;
  for (auto [a, b] : local.pairs)
    matching.pairs.emplace_back(kept.retained[static_cast<std::size_t>(a)], kept.retained[static_cast<std::size_t>(b)]);

  const auto& labels = data.labels();
  CrossCounts counts = cross_counts(matching, labels, data.k());
  std::vector<int> sizes(static_cast<std::size_t>(data.k()), 0);
  for (int r : kept.retained) ++sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])];

  TestOutcome out = mmcm_statistic(counts, null_moments(sizes, counts.pair_total));
  out.dropped_row = kept.dropped;
  out.mode = config.calibration;
  if (out.dof == 0) {
    out.p_value = 1.0;  // degenerate null: the counts cannot vary
  } else if (config.calibration == Calibration::chi_square) {
    out.p_value = p_value_chisq(out.statistic, out.dof);
  } else {
    out.p_value = p_value_permutation(matching, labels, data.k(), config.permutations, mix_seed(seed),
                                      config.workers);
    out.permutations_used = config.permutations;
  }
  return out;
}

}  // namespace gfs
