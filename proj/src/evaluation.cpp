#include "gfs/evaluation.hpp"

#include "gfs/parallel.hpp"
#include "gfs/random.hpp"
#include "gfs/selection.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace gfs {

std::string to_string(Design d) {
  switch (d) {
    case Design::location: return "location";
    case Design::scale: return "scale";
    case Design::dependent: return "dependent";
    case Design::cross_family: return "cross-family";
  }
  return "?";
}

Design parse_design(const std::string& s) {
  if (s == "location") return Design::location;
  if (s == "scale") return Design::scale;
  if (s == "dependent" || s == "location-scale-dependent") return Design::dependent;
  if (s == "cross-family" || s == "cross_family") return Design::cross_family;
  throw InputError("unknown design '" + s + "'");
}

namespace {

void check_sizes(int d, int s, int k, std::span<const int> class_sizes) {
  if (d < 1) throw InputError("d must be >= 1");
  if (s < 0 || s > d) throw InputError("signal size must lie in 0..d");
  if (k < 2) throw InputError("K must be >= 2");
  if (static_cast<int>(class_sizes.size()) != k) throw InputError("need one class size per class");
  for (int n : class_sizes)
    if (n < 1) throw InputError("class sizes must be positive");
}

std::vector<int> draw_signal(int d, int s, Rng& rng) {
  std::vector<int> all(static_cast<std::size_t>(d));
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> out;
  std::sample(all.begin(), all.end(), std::back_inserter(out), s, rng);
  return out;
}

std::vector<int> labels_for(std::span<const int> class_sizes) {
  std::vector<int> labels;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) labels.insert(labels.end(), static_cast<std::size_t>(class_sizes[c]), static_cast<int>(c));
  return labels;
}

int total(std::span<const int> class_sizes) { return std::accumulate(class_sizes.begin(), class_sizes.end(), 0); }

SignalSpec make_spec(Design design, int d, int s, double theta, double phi, double rho, int k,
                     std::span<const int> class_sizes, double t_dof, std::vector<int> signal) {
  SignalSpec spec;
  spec.signal_set = std::move(signal);
  spec.point = DesignPoint{design, d, s, k, class_sizes.empty() ? 0 : class_sizes[0], theta, phi, rho, t_dof};
  return spec;
}

}  // namespace

SimulatedData gen_location(int d, int s, double theta, int k, std::span<const int> class_sizes, std::uint64_t seed) {
  check_sizes(d, s, k, class_sizes);
  if (!(theta >= 0)) throw InputError("theta must be >= 0");
  Rng rng = make_rng(seed, 1);
  std::vector<int> signal = draw_signal(d, s, rng);
  std::normal_distribution<double> normal;
  Matrix x(total(class_sizes), d);
  Eigen::Index row = 0;
  for (int c = 0; c < k; ++c)
    for (int r = 0; r < class_sizes[static_cast<std::size_t>(c)]; ++r, ++row)
      for (int j = 0; j < d; ++j) x(row, j) = normal(rng);
  for (int j : signal) {
    row = 0;
    for (int c = 0; c < k; ++c)
      for (int r = 0; r < class_sizes[static_cast<std::size_t>(c)]; ++r, ++row) x(row, j) += (c + 1) * theta;
  }
  return {LabeledDataset(std::move(x), labels_for(class_sizes)),
          make_spec(Design::location, d, s, theta, 0, 0, k, class_sizes, 0, std::move(signal))};
}

SimulatedData gen_scale(int d, int s, double theta, int k, std::span<const int> class_sizes, std::uint64_t seed) {
  check_sizes(d, s, k, class_sizes);
  if (!(theta >= 0)) throw InputError("theta must be >= 0");
  Rng rng = make_rng(seed, 1);
  std::vector<int> signal = draw_signal(d, s, rng);
  std::normal_distribution<double> normal;
  Matrix x(total(class_sizes), d);
  Eigen::Index row = 0;
  for (int c = 0; c < k; ++c)
    for (int r = 0; r < class_sizes[static_cast<std::size_t>(c)]; ++r, ++row)
      for (int j = 0; j < d; ++j) x(row, j) = normal(rng);
  for (int j : signal) {
    row = 0;
    for (int c = 0; c < k; ++c) {
      const double sd = std::sqrt(1.0 + c * theta);
      for (int r = 0; r < class_sizes[static_cast<std::size_t>(c)]; ++r, ++row) x(row, j) *= sd;
    }
  }
  return {LabeledDataset(std::move(x), labels_for(class_sizes)),
          make_spec(Design::scale, d, s, theta, 0, 0, k, class_sizes, 0, std::move(signal))};
}

SimulatedData gen_dependent(int d, int s, double theta, double phi, double rho, int k,
                            std::span<const int> class_sizes, std::uint64_t seed) {
  check_sizes(d, s, k, class_sizes);
  if (!(theta >= 0) || !(phi >= 0)) throw InputError("theta and phi must be >= 0");
  if (!(rho > -1.0 && rho < 1.0)) throw InputError("rho must lie in (-1, 1)");
  Rng rng = make_rng(seed, 1);
  std::vector<int> signal = draw_signal(d, s, rng);
  std::vector<bool> in_l(static_cast<std::size_t>(d), false);
  for (int j : signal) in_l[static_cast<std::size_t>(j)] = true;

  std::normal_distribution<double> normal;
  Matrix x(total(class_sizes), d);
  Eigen::VectorXd z(d);
  Eigen::Index row = 0;
  for (int c = 0; c < k; ++c) {
    const double inflate = 1.0 + c * phi;
    Matrix sigma(d, d);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (int j = 0; j < d; ++j) {
      const bool lj = in_l[static_cast<std::size_t>(j)];
      if (lj) mu(j) = (c + 1) * theta;
      for (int m = 0; m < d; ++m) {
        const bool both = lj && in_l[static_cast<std::size_t>(m)];
        if (j == m)
          sigma(j, m) = both ? inflate : 1.0;
        else
          sigma(j, m) = both ? rho * inflate : rho;
      }
    }
    Eigen::LLT<Matrix> chol(sigma);
    if (chol.info() != Eigen::Success)
      throw InputError("covariance of class " + std::to_string(c + 1) + " is not positive definite for rho = " +
                       std::to_string(rho) + ", phi = " + std::to_string(phi));
    const Matrix lower = chol.matrixL();
    for (int r = 0; r < class_sizes[static_cast<std::size_t>(c)]; ++r, ++row) {
      for (int j = 0; j < d; ++j) z(j) = normal(rng);
      x.row(row) = (mu + lower * z).transpose();
    }
  }
  return {LabeledDataset(std::move(x), labels_for(class_sizes)),
          make_spec(Design::dependent, d, s, theta, phi, rho, k, class_sizes, 0, std::move(signal))};
}

SimulatedData gen_cross_family(int d, std::span<const int> class_sizes, double t_dof, std::uint64_t seed) {
  const int s = (d + 3) / 4;
  check_sizes(d, s, 3, class_sizes);
  if (!(t_dof > 0)) throw InputError("t degrees of freedom must be positive");
  Rng rng = make_rng(seed, 1);
  std::normal_distribution<double> normal;
  std::chi_squared_distribution<double> chi2(t_dof);
  Matrix x(total(class_sizes), d);
  Eigen::Index row = 0;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < class_sizes[static_cast<std::size_t>(c)]; ++r, ++row)
      for (int j = 0; j < d; ++j) {
        if (j >= s || c == 0) {
          x(row, j) = normal(rng);
        } else if (c == 1) {
          const double num = normal(rng);
          x(row, j) = num / normal(rng);  // ratio of independent normals is standard Cauchy
        } else {
          const double num = normal(rng);
          x(row, j) = num / std::sqrt(chi2(rng) / t_dof);
        }
      }
  std::vector<int> signal(static_cast<std::size_t>(s));
  std::iota(signal.begin(), signal.end(), 0);
  return {LabeledDataset(std::move(x), labels_for(class_sizes)),
          make_spec(Design::cross_family, d, s, 0, 0, 0, 3, class_sizes, t_dof, std::move(signal))};
}

SimulatedData generate(const DesignPoint& p, std::uint64_t seed) {
  const std::vector<int> sizes(static_cast<std::size_t>(p.design == Design::cross_family ? 3 : p.k), p.class_size);
  switch (p.design) {
    case Design::location: return gen_location(p.d, p.s, p.theta, p.k, sizes, seed);
    case Design::scale: return gen_scale(p.d, p.s, p.theta, p.k, sizes, seed);
    case Design::dependent: return gen_dependent(p.d, p.s, p.theta, p.phi, p.rho, p.k, sizes, seed);
    case Design::cross_family: return gen_cross_family(p.d, sizes, p.t_dof, seed);
  }
  throw InputError("unknown design");
}

MetricEstimates estimate_metrics(const std::vector<std::vector<int>>& selected, const std::vector<int>& signal) {
  return estimate_metrics(selected, std::vector<std::vector<int>>(selected.size(), signal));
}

MetricEstimates estimate_metrics(const std::vector<std::vector<int>>& selected,
                                 const std::vector<std::vector<int>>& signals) {
  if (selected.empty()) throw InputError("metrics need at least one replicate");
  if (signals.size() != selected.size()) throw InputError("one signal set per replicate required");
  MetricEstimates m;
  m.replicates = static_cast<int>(selected.size());
  m.selected = selected;
  for (std::size_t r = 0; r < selected.size(); ++r) {
    std::vector<int> s = selected[r];
    std::vector<int> l = signals[r];
    std::sort(s.begin(), s.end());
    std::sort(l.begin(), l.end());
    std::vector<int> false_sel, hit;
    std::set_difference(s.begin(), s.end(), l.begin(), l.end(), std::back_inserter(false_sel));
    std::set_intersection(s.begin(), s.end(), l.begin(), l.end(), std::back_inserter(hit));
    m.fwer += false_sel.empty() ? 0.0 : 1.0;
    m.fdr += static_cast<double>(false_sel.size()) / static_cast<double>(std::max<std::size_t>(s.size(), 1));
    m.power += hit.size() == l.size() ? 1.0 : 0.0;
    m.mean_recall += l.empty() ? 1.0 : static_cast<double>(hit.size()) / static_cast<double>(l.size());
    m.mean_selected += static_cast<double>(s.size());
  }
  const double r = m.replicates;
  m.fwer /= r;
  m.fdr /= r;
  m.power /= r;
  m.mean_recall /= r;
  m.mean_selected /= r;
  return m;
}

double kruskal_wallis(const LabeledDataset& data, int feature) {
  if (feature < 0 || feature >= data.d()) throw InputError("feature index out of range");
  const int n = data.n();
  const int k = data.k();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const auto col = data.values().col(feature);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return col(a) < col(b); });

  std::vector<double> rank_sum(static_cast<std::size_t>(k), 0.0);
  double tie_term = 0.0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && col(order[static_cast<std::size_t>(j + 1)]) == col(order[static_cast<std::size_t>(i)])) ++j;
    const double rank = 0.5 * (i + j) + 1.0;
    const double t = j - i + 1;
    tie_term += t * t * t - t;
    for (int m = i; m <= j; ++m)
      rank_sum[static_cast<std::size_t>(data.labels()[static_cast<std::size_t>(order[static_cast<std::size_t>(m)])])] += rank;
    i = j + 1;
  }
  const double nn = n;
  const double correction = 1.0 - tie_term / (nn * nn * nn - nn);
  if (correction <= 0.0) return 1.0;
  double h = 0.0;
  for (int g = 0; g < k; ++g)
    h += rank_sum[static_cast<std::size_t>(g)] * rank_sum[static_cast<std::size_t>(g)] /
         data.group_sizes()[static_cast<std::size_t>(g)];
  h = 12.0 / (nn * (nn + 1.0)) * h - 3.0 * (nn + 1.0);
  h /= correction;
  return p_value_chisq(std::max(0.0, h), k - 1);
}

std::vector<int> kw_select(const LabeledDataset& data, double alpha) {
  std::vector<int> out;
  for (int j = 0; j < data.d(); ++j)
    if (std::min(1.0, kruskal_wallis(data, j) * data.d()) <= alpha) out.push_back(j);
  return out;
}

PointResult run_design_point(const DesignPoint& point, const SimulationSettings& settings) {
  if (settings.replicates < 1) throw InputError("replicates must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  const auto reps = static_cast<std::size_t>(settings.replicates);
  std::vector<std::vector<int>> gfs_sel(reps), kw_sel(reps), signals(reps);
  parallel_for(reps, settings.workers, [&](std::size_t r) {
    const std::uint64_t rep_seed = derive_seed(settings.seed, r);
    const SimulatedData sim = generate(point, rep_seed);
    signals[r] = sim.spec.signal_set;
    if (settings.run_gfs) {
      const ClusterTree tree = ClusterTree::single_linkage(correlation_dissimilarity(sim.data, settings.dissimilarity));
      TestConfig cfg = settings.test;
      cfg.seed = derive_seed(rep_seed, 0x6F5);
      cfg.workers = 1;
      gfs_sel[r] = gfs_select(sim.data, tree, settings.alpha, cfg).selected;
    }
    if (settings.run_kw) kw_sel[r] = kw_select(sim.data, settings.alpha);
  });
  PointResult out;
  out.point = point;
  if (settings.run_gfs) out.gfs = estimate_metrics(gfs_sel, signals);
  if (settings.run_kw) out.kw = estimate_metrics(kw_sel, signals);
  out.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace gfs
