#include "gfs/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace gfs {

std::string to_string(Correlation c) { return c == Correlation::pearson ? "pearson" : "spearman"; }

Correlation parse_correlation(const std::string& s) {
  if (s == "pearson") return Correlation::pearson;
  if (s == "spearman") return Correlation::spearman;
  throw InputError("unknown dissimilarity '" + s + "' (expected pearson or spearman)");
}

namespace {

// Mid-ranks (1-based, ties averaged).
Eigen::VectorXd midranks(const Eigen::VectorXd& x) {
  const auto n = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x(a) < x(b); });
  Eigen::VectorXd r(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && x(order[static_cast<std::size_t>(j + 1)]) == x(order[static_cast<std::size_t>(i)])) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index t = i; t <= j; ++t) r(order[static_cast<std::size_t>(t)]) = rank;
    i = j + 1;
  }
  return r;
}

}  // namespace

Matrix correlation_matrix(const Matrix& values, Correlation method) {
  if (values.rows() < 2) throw InputError("correlation needs at least 2 observations");
  Matrix x = values;
  if (method == Correlation::spearman)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j) = midranks(values.col(j));
  const auto d = x.cols();
  std::vector<bool> constant(static_cast<std::size_t>(d), false);
  for (Eigen::Index j = 0; j < d; ++j) {
    x.col(j).array() -= x.col(j).mean();
    const double norm = x.col(j).norm();
    // Relative test so that a column of identical large values counts as constant.
    const double scale = values.col(j).cwiseAbs().maxCoeff();
    if (norm <= 1e-12 * std::max(1.0, scale) * std::sqrt(static_cast<double>(x.rows()))) {
      constant[static_cast<std::size_t>(j)] = true;
      x.col(j).setZero();
    } else {
      x.col(j) /= norm;
    }
  }
  Matrix r = x.transpose() * x;
  for (Eigen::Index j = 0; j < d; ++j) {
    r(j, j) = 1.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (i == j) continue;
      if (constant[static_cast<std::size_t>(i)] || constant[static_cast<std::size_t>(j)]) r(i, j) = 0.0;
      r(i, j) = std::clamp(r(i, j), -1.0, 1.0);
    }
  }
  return r;
}

Matrix correlation_dissimilarity(const LabeledDataset& data, Correlation method) {
  Matrix r = correlation_matrix(data.values(), method);
  Matrix out = Matrix::Ones(r.rows(), r.cols()) - r;
  out.diagonal().setZero();
  return out;
}

ClusterTree ClusterTree::single_linkage(const Matrix& dissim) {
  const int d = static_cast<int>(dissim.rows());
  if (d < 1 || dissim.cols() != dissim.rows()) throw InputError("dissimilarity matrix must be square and non-empty");
  if (!dissim.allFinite()) throw InputError("dissimilarity matrix has non-finite entries");

  // Slot p holds the active cluster whose smallest feature index is p.
  Matrix dist = dissim;
  std::vector<bool> active(static_cast<std::size_t>(d), true);
  std::vector<int> node_of(static_cast<std::size_t>(d));
  std::iota(node_of.begin(), node_of.end(), 0);
  std::vector<int> nn(static_cast<std::size_t>(d), -1);

  auto key = [&](int p, int q) { return std::make_tuple(dist(p, q), std::min(p, q), std::max(p, q)); };
  auto refresh = [&](int p) {
    nn[static_cast<std::size_t>(p)] = -1;
    for (int q = 0; q < d; ++q)
      if (q != p && active[static_cast<std::size_t>(q)] &&
          (nn[static_cast<std::size_t>(p)] < 0 || key(p, q) < key(p, nn[static_cast<std::size_t>(p)])))
        nn[static_cast<std::size_t>(p)] = q;
  };
  for (int p = 0; p < d; ++p) refresh(p);

  std::vector<std::pair<int, int>> merges;
  std::vector<double> heights;
  for (int step = 0; step + 1 < d; ++step) {
    int best = -1;
    for (int p = 0; p < d; ++p)
      if (active[static_cast<std::size_t>(p)] &&
          (best < 0 || key(p, nn[static_cast<std::size_t>(p)]) < key(best, nn[static_cast<std::size_t>(best)])))
        best = p;
    const int a = std::min(best, nn[static_cast<std::size_t>(best)]);
    const int b = std::max(best, nn[static_cast<std::size_t>(best)]);
    merges.emplace_back(node_of[static_cast<std::size_t>(a)], node_of[static_cast<std::size_t>(b)]);
    heights.push_back(dist(a, b));
    node_of[static_cast<std::size_t>(a)] = d + step;
    active[static_cast<std::size_t>(b)] = false;
    for (int x = 0; x < d; ++x)
      if (active[static_cast<std::size_t>(x)] && x != a) dist(a, x) = dist(x, a) = std::min(dist(a, x), dist(b, x));
    refresh(a);
    for (int x = 0; x < d; ++x) {
      if (!active[static_cast<std::size_t>(x)] || x == a) continue;
      const int cur = nn[static_cast<std::size_t>(x)];
      if (cur == a || cur == b)
        refresh(x);
      else if (key(x, a) < key(x, cur))
        nn[static_cast<std::size_t>(x)] = a;
    }
  }
  return from_merges(d, merges, heights);
}

ClusterTree ClusterTree::from_merges(int d, const std::vector<std::pair<int, int>>& merges,
                                     const std::vector<double>& heights) {
  if (d < 1) throw InputError("tree needs d >= 1");
  if (static_cast<int>(merges.size()) != d - 1) throw InputError("a tree over d features needs d - 1 merges");
  ClusterTree t;
  t.d_ = d;
  for (int i = 0; i < d; ++i) t.nodes_.push_back(Node{FeatureSubset({i}), -1, -1, -1, 0.0});
  for (std::size_t s = 0; s < merges.size(); ++s) {
    auto [x, y] = merges[s];
    const int id = d + static_cast<int>(s);
    if (x < 0 || y < 0 || x >= id || y >= id || x == y) throw InputError("merge references an invalid node");
    if (t.nodes_[static_cast<std::size_t>(x)].parent >= 0 || t.nodes_[static_cast<std::size_t>(y)].parent >= 0)
      throw InputError("merge reuses a node that already has a parent");
    if (t.nodes_[static_cast<std::size_t>(x)].features[0] > t.nodes_[static_cast<std::size_t>(y)].features[0])
      std::swap(x, y);
    Node n;
    n.features = merge(t.nodes_[static_cast<std::size_t>(x)].features, t.nodes_[static_cast<std::size_t>(y)].features);
    n.left = x;
    n.right = y;
    n.height = s < heights.size() ? heights[s] : static_cast<double>(s + 1);
    t.nodes_[static_cast<std::size_t>(x)].parent = id;
    t.nodes_[static_cast<std::size_t>(y)].parent = id;
    t.nodes_.push_back(std::move(n));
  }
  t.validate();
  return t;
}

std::vector<int> ClusterTree::preorder() const {
  std::vector<int> out;
  out.reserve(nodes_.size());
  std::vector<int> stack{root()};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    out.push_back(id);
    const Node& n = node(id);
    if (!n.is_leaf()) {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

void ClusterTree::validate() const {
  if (static_cast<int>(nodes_.size()) != 2 * d_ - 1) throw std::logic_error("tree must have 2d - 1 nodes");
  if (node(root()).features != FeatureSubset::all(d_)) throw std::logic_error("root must hold every feature");
  if (node(root()).parent != -1) throw std::logic_error("root has a parent");
  for (int id = 0; id < size(); ++id) {
    const Node& n = node(id);
    if (n.is_leaf()) {
      if (n.features.size() != 1) throw std::logic_error("leaf nodes must be singletons");
      continue;
    }
    const Node& l = node(n.left);
    const Node& r = node(n.right);
    if (l.parent != id || r.parent != id) throw std::logic_error("child/parent links disagree");
    std::vector<int> both;
    std::set_intersection(l.features.begin(), l.features.end(), r.features.begin(), r.features.end(),
                          std::back_inserter(both));
    if (!both.empty()) throw std::logic_error("children overlap");
    if (merge(l.features, r.features) != n.features) throw std::logic_error("children do not unite to parent");
  }
}

namespace {

std::string label_for(int feature, const std::vector<std::string>& names) {
  if (feature < static_cast<int>(names.size())) return names[static_cast<std::size_t>(feature)];
  return "x" + std::to_string(feature + 1);
}

std::string newick_label(const std::string& s) {
  if (s.find_first_of(" ()[]':;,\t") == std::string::npos && !s.empty()) return s;
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

}  // namespace

nlohmann::json ClusterTree::to_json(const std::vector<std::string>& names) const {
  auto build = [&](auto&& self, int id) -> nlohmann::json {
    const Node& n = node(id);
    nlohmann::json j;
    j["id"] = id;
    std::vector<int> one_based;
    for (int f : n.features) one_based.push_back(f + 1);
    j["features"] = one_based;
    j["height"] = n.height;
    if (n.is_leaf()) {
      j["name"] = label_for(n.features[0], names);
    } else {
      j["children"] = nlohmann::json::array({self(self, n.left), self(self, n.right)});
    }
    return j;
  };
  nlohmann::json out;
  out["schema"] = "gfs.tree/1";
  out["d"] = d_;
  out["root"] = build(build, root());
  return out;
}

std::string ClusterTree::to_newick(const std::vector<std::string>& names) const {
  std::ostringstream os;
  os << std::setprecision(10);
  auto emit = [&](auto&& self, int id) -> void {
    const Node& n = node(id);
    if (n.is_leaf()) {
      os << newick_label(label_for(n.features[0], names));
    } else {
      os << '(';
      self(self, n.left);
      os << ',';
      self(self, n.right);
      os << ')';
    }
    if (n.parent >= 0) os << ':' << (node(n.parent).height - n.height);
  };
  emit(emit, root());
  os << ';';
  return os.str();
}

FeatureGroups pivot_groups(const LabeledDataset& data, int num_groups, double rho_start, double rho_step) {
  const int d = data.d();
  if (num_groups < 1) throw InputError("number of groups must be >= 1");
  if (d < num_groups) throw InputError("cannot split " + std::to_string(d) + " features into " +
                                       std::to_string(num_groups) + " groups");
  if (!(rho_step > 0)) throw InputError("rho step must be positive");
  const Matrix r = correlation_matrix(data.values(), Correlation::spearman);

  std::vector<int> remaining(static_cast<std::size_t>(d));
  std::iota(remaining.begin(), remaining.end(), 0);
  FeatureGroups out;
  for (int left = num_groups; left >= 1; --left) {
    const int target = left == 1 ? static_cast<int>(remaining.size())
                                 : static_cast<int>((remaining.size() + static_cast<std::size_t>(left) - 1) /
                                                    static_cast<std::size_t>(left));
    int pivot = remaining.front();
    double rho = rho_start;
    if (remaining.size() > 1) {
      for (int step = 0;; ++step) {
        rho = rho_start - step * rho_step;
        std::size_t best_count = 0;
        int best = -1;
        for (int i : remaining) {
          std::size_t count = 0;
          for (int j : remaining)
            if (j != i && r(i, j) >= rho) ++count;
          if (count > best_count) {
            best_count = count;
            best = i;
          }
        }
        if (best >= 0) {
          pivot = best;
          break;
        }
      }
    }
    std::vector<int> others;
    for (int j : remaining)
      if (j != pivot) others.push_back(j);
    std::stable_sort(others.begin(), others.end(), [&](int a, int b) { return r(pivot, a) > r(pivot, b); });
    std::vector<int> members{pivot};
    members.insert(members.end(), others.begin(), others.begin() + (target - 1));
    std::sort(members.begin(), members.end());
    std::vector<int> rest;
    std::set_difference(remaining.begin(), remaining.end(), members.begin(), members.end(), std::back_inserter(rest));
    remaining = std::move(rest);
    out.groups.emplace_back(std::move(members));
    out.pivots.push_back(pivot);
    out.rho_used.push_back(rho);
  }
  return out;
}

}  // namespace gfs
