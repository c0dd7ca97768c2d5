#include "gfs/matching.hpp"

#include "gfs/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gfs {

Matrix pairwise_distances(const Matrix& points) {
  if (!points.allFinite()) throw InputError("pairwise_distances: non-finite coordinates");
  std::vector<int> rows(static_cast<std::size_t>(points.rows()));
  std::vector<int> cols(static_cast<std::size_t>(points.cols()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = static_cast<int>(j);
  return pairwise_distances(points, rows, cols);
}

Matrix pairwise_distances(const Matrix& data, const std::vector<int>& rows, const std::vector<int>& features) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix sq = Matrix::Zero(n, n);
  std::vector<double> col(rows.size());
  for (int f : features) {
    for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = data(rows[static_cast<std::size_t>(i)], f);
    for (Eigen::Index j = 1; j < n; ++j) {
      const double xj = col[static_cast<std::size_t>(j)];
      double* out = sq.col(j).data();
      for (Eigen::Index i = 0; i < j; ++i) {
        const double diff = col[static_cast<std::size_t>(i)] - xj;
        out[i] += diff * diff;
      }
    }
  }
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) {
      const double v = std::sqrt(sq(i, j));
      sq(i, j) = v;
      sq(j, i) = v;
    }
  if (!sq.allFinite()) throw InputError("pairwise_distances: non-finite coordinates");
  return sq;
}

double matching_weight(const Matrix& dist, const std::vector<std::pair<int, int>>& pairs) {
  double total = 0.0;
  for (auto [a, b] : pairs) total += dist(a, b);
  return total;
}

namespace {

// Maximum-weight perfect matching on a general graph with integer weights,
// after Gabow's O(n^3) formulation of Edmonds' blossom algorithm. Vertices
// are 1..n; blossoms take ids n+1..2n. Weight 0 means "no edge". Vertex duals
// are unconstrained in sign (perfect-matching duals), so the search only
// stops once every vertex is matched.
class BlossomMatcher {
 public:
  explicit BlossomMatcher(int n)
      : n_(n),
        cap_(2 * n + 1),
        g_(static_cast<std::size_t>(cap_) * static_cast<std::size_t>(cap_)),
        lab_(static_cast<std::size_t>(cap_), 0),
        match_(static_cast<std::size_t>(cap_), 0),
        slack_(static_cast<std::size_t>(cap_), 0),
        st_(static_cast<std::size_t>(cap_), 0),
        pa_(static_cast<std::size_t>(cap_), 0),
        flower_from_(static_cast<std::size_t>(cap_) * static_cast<std::size_t>(n + 1), 0),
        s_(static_cast<std::size_t>(cap_), 0),
        vis_(static_cast<std::size_t>(cap_), 0),
        flower_(static_cast<std::size_t>(cap_)) {
    for (int u = 1; u <= n_; ++u)
      for (int v = 1; v <= n_; ++v) g(u, v) = Edge{u, v, 0};
  }

  void set_weight(int u, int v, std::int64_t w) {
    g(u, v).w = w;
    g(v, u).w = w;
  }

  /// Maximum-weight perfect matching, started from a feasible dual
  /// `initial_lab` (lab[u] + lab[v] >= 2 w(u, v)) and a matching `initial_mate`
  /// made of tight edges only. Vertices are 1-based; index 0 is unused.
  void solve(const std::vector<std::int64_t>& initial_lab, const std::vector<int>& initial_mate) {
    n_x_ = n_;
    for (int u = 0; u <= n_; ++u) {
      st_[static_cast<std::size_t>(u)] = u;
      flower_[static_cast<std::size_t>(u)].clear();
    }
    for (int u = 1; u <= n_; ++u)
      for (int v = 1; v <= n_; ++v) from(u, v) = (u == v ? u : 0);
    std::fill(match_.begin(), match_.end(), 0);
    for (int u = 1; u <= n_; ++u) {
      lab(u) = initial_lab[static_cast<std::size_t>(u)];
      match(u) = initial_mate[static_cast<std::size_t>(u)];
    }
    while (augment_once()) {
    }
  }

  int mate(int u) const { return match_[static_cast<std::size_t>(u)]; }

 private:
  struct Edge {
    int u = 0, v = 0;
    std::int64_t w = 0;
  };

  Edge& g(int u, int v) { return g_[static_cast<std::size_t>(u) * static_cast<std::size_t>(cap_) + static_cast<std::size_t>(v)]; }
  int& from(int b, int x) { return flower_from_[static_cast<std::size_t>(b) * static_cast<std::size_t>(n_ + 1) + static_cast<std::size_t>(x)]; }
  std::int64_t& lab(int x) { return lab_[static_cast<std::size_t>(x)]; }
  int& match(int x) { return match_[static_cast<std::size_t>(x)]; }
  int& slack(int x) { return slack_[static_cast<std::size_t>(x)]; }
  int& st(int x) { return st_[static_cast<std::size_t>(x)]; }
  int& pa(int x) { return pa_[static_cast<std::size_t>(x)]; }
  int& S(int x) { return s_[static_cast<std::size_t>(x)]; }
  std::vector<int>& flower(int x) { return flower_[static_cast<std::size_t>(x)]; }

  std::int64_t slack_of(const Edge& e) { return lab(e.u) + lab(e.v) - e.w * 2; }

  void update_slack(int u, int x) {
    if (!slack(x) || slack_of(g(u, x)) < slack_of(g(slack(x), x))) slack(x) = u;
  }

  void set_slack(int x) {
    slack(x) = 0;
    for (int u = 1; u <= n_; ++u)
      if (g(u, x).w > 0 && st(u) != x && S(st(u)) == 0) update_slack(u, x);
  }

  void q_push(int x) {
    if (x <= n_) {
      queue_.push_back(x);
    } else {
      for (int y : flower(x)) q_push(y);
    }
  }

  void set_st(int x, int b) {
    st(x) = b;
    if (x > n_)
      for (int y : flower(x)) set_st(y, b);
  }

  int get_pr(int b, int xr) {
    auto& fl = flower(b);
    const int pr = static_cast<int>(std::find(fl.begin(), fl.end(), xr) - fl.begin());
    if (pr % 2 == 1) {
      std::reverse(fl.begin() + 1, fl.end());
      return static_cast<int>(fl.size()) - pr;
    }
    return pr;
  }

  void set_match(int u, int v) {
    match(u) = g(u, v).v;
    if (u > n_) {
      const Edge e = g(u, v);
      const int xr = from(u, e.u);
      const int pr = get_pr(u, xr);
      auto& fl = flower(u);
      for (int i = 0; i < pr; ++i) set_match(fl[static_cast<std::size_t>(i)], fl[static_cast<std::size_t>(i ^ 1)]);
      set_match(xr, v);
      std::rotate(fl.begin(), fl.begin() + pr, fl.end());
    }
  }

  void augment(int u, int v) {
    for (;;) {
      const int xnv = st(match(u));
      set_match(u, v);
      if (!xnv) return;
      set_match(xnv, st(pa(xnv)));
      u = st(pa(xnv));
      v = xnv;
    }
  }

  int get_lca(int u, int v) {
    for (++stamp_; u || v; std::swap(u, v)) {
      if (u == 0) continue;
      if (vis_[static_cast<std::size_t>(u)] == stamp_) return u;
      vis_[static_cast<std::size_t>(u)] = stamp_;
      u = st(match(u));
      if (u) u = st(pa(u));
    }
    return 0;
  }

  void add_blossom(int u, int lca, int v) {
    int b = n_ + 1;
    while (b <= n_x_ && st(b)) ++b;
    if (b > n_x_) ++n_x_;
    lab(b) = 0;
    S(b) = 0;
    match(b) = match(lca);
    auto& fl = flower(b);
    fl.clear();
    fl.push_back(lca);
    for (int x = u, y; x != lca; x = st(pa(y))) {
      fl.push_back(x);
      fl.push_back(y = st(match(x)));
      q_push(y);
    }
    std::reverse(fl.begin() + 1, fl.end());
    for (int x = v, y; x != lca; x = st(pa(y))) {
      fl.push_back(x);
      fl.push_back(y = st(match(x)));
      q_push(y);
    }
    set_st(b, b);
    for (int x = 1; x <= n_x_; ++x) g(b, x).w = g(x, b).w = 0;
    for (int x = 1; x <= n_; ++x) from(b, x) = 0;
    for (int xs : fl) {
      for (int x = 1; x <= n_x_; ++x)
        if (g(b, x).w == 0 || slack_of(g(xs, x)) < slack_of(g(b, x))) {
          g(b, x) = g(xs, x);
          g(x, b) = g(x, xs);
        }
      for (int x = 1; x <= n_; ++x)
        if (from(xs, x)) from(b, x) = xs;
    }
    set_slack(b);
  }

  void expand_blossom(int b) {
    for (int x : flower(b)) set_st(x, x);
    const int xr = from(b, g(b, pa(b)).u);
    const int pr = get_pr(b, xr);
    const auto& fl = flower(b);
    for (int i = 0; i < pr; i += 2) {
      const int xs = fl[static_cast<std::size_t>(i)];
      const int xns = fl[static_cast<std::size_t>(i + 1)];
      pa(xs) = g(xns, xs).u;
      S(xs) = 1;
      S(xns) = 0;
      slack(xs) = 0;
      set_slack(xns);
      q_push(xns);
    }
    S(xr) = 1;
    pa(xr) = pa(b);
    for (std::size_t i = static_cast<std::size_t>(pr) + 1; i < fl.size(); ++i) {
      const int xs = fl[i];
      S(xs) = -1;
      set_slack(xs);
    }
    st(b) = 0;
  }

  bool on_found_edge(const Edge& e) {
    const int u = st(e.u);
    const int v = st(e.v);
    if (S(v) == -1) {
      pa(v) = e.u;
      S(v) = 1;
      const int nu = st(match(v));
      slack(v) = slack(nu) = 0;
      S(nu) = 0;
      q_push(nu);
    } else if (S(v) == 0) {
      const int lca = get_lca(u, v);
      if (!lca) {
        augment(u, v);
        augment(v, u);
        return true;
      }
      add_blossom(u, lca, v);
    }
    return false;
  }

  bool augment_once() {
    for (int x = 1; x <= n_x_; ++x) {
      S(x) = -1;
      slack(x) = 0;
    }
    queue_.clear();
    head_ = 0;
    for (int x = 1; x <= n_x_; ++x)
      if (st(x) == x && !match(x)) {
        pa(x) = 0;
        S(x) = 0;
        q_push(x);
      }
    if (queue_.empty()) return false;
    for (;;) {
      while (head_ < queue_.size()) {
        const int u = queue_[head_++];
        if (S(st(u)) == 1) continue;
        for (int v = 1; v <= n_; ++v) {
          const Edge& e = g(u, v);
          if (e.w > 0 && st(u) != st(v)) {
            if (slack_of(e) == 0) {
              if (on_found_edge(e)) return true;
            } else {
              update_slack(u, st(v));
            }
          }
        }
      }
      std::int64_t d = std::numeric_limits<std::int64_t>::max();
      for (int b = n_ + 1; b <= n_x_; ++b)
        if (st(b) == b && S(b) == 1) d = std::min(d, lab(b) / 2);
      for (int x = 1; x <= n_x_; ++x)
        if (st(x) == x && slack(x)) {
          if (S(x) == -1)
            d = std::min(d, slack_of(g(slack(x), x)));
          else if (S(x) == 0)
            d = std::min(d, slack_of(g(slack(x), x)) / 2);
        }
      // The graph is complete with an even vertex count, so some edge
      // always bounds the dual step.
      if (d == std::numeric_limits<std::int64_t>::max()) throw std::logic_error("blossom matcher: unbounded dual step");
      for (int u = 1; u <= n_; ++u) {
        if (S(st(u)) == 0) {
          lab(u) -= d;
        } else if (S(st(u)) == 1) {
          lab(u) += d;
        }
      }
      for (int b = n_ + 1; b <= n_x_; ++b)
        if (st(b) == b) {
          if (S(st(b)) == 0)
            lab(b) += d * 2;
          else if (S(st(b)) == 1)
            lab(b) -= d * 2;
        }
      queue_.clear();
      head_ = 0;
      for (int x = 1; x <= n_x_; ++x)
        if (st(x) == x && slack(x) && st(slack(x)) != x && slack_of(g(slack(x), x)) == 0)
          if (on_found_edge(g(slack(x), x))) return true;
      for (int b = n_ + 1; b <= n_x_; ++b)
        if (st(b) == b && S(b) == 1 && lab(b) == 0) expand_blossom(b);
    }
  }

  int n_;
  int cap_;
  int n_x_ = 0;
  std::vector<Edge> g_;
  std::vector<std::int64_t> lab_;
  std::vector<int> match_, slack_, st_, pa_, flower_from_, s_, vis_;
  std::vector<std::vector<int>> flower_;
  std::vector<int> queue_;
  std::size_t head_ = 0;
  int stamp_ = 0;
};

void canonicalize_ties(const Matrix& dist, std::vector<std::pair<int, int>>& pairs) {
  auto same = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1e-300, std::abs(a), std::abs(b)}); };
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < pairs.size(); ++i)
      for (std::size_t j = i + 1; j < pairs.size(); ++j) {
        int pts[4] = {pairs[i].first, pairs[i].second, pairs[j].first, pairs[j].second};
        std::sort(pts, pts + 4);
        const int a = pts[0];
        const double current = dist(pairs[i].first, pairs[i].second) + dist(pairs[j].first, pairs[j].second);
        int partner_now = pairs[i].first == a ? pairs[i].second : pairs[i].second == a ? pairs[i].first
                          : pairs[j].first == a ? pairs[j].second : pairs[j].first;
        // Options pair `a` with pts[1], pts[2], pts[3]; smaller partner first.
        for (int k = 1; k <= 3; ++k) {
          const int partner = pts[k];
          if (partner >= partner_now) break;
          int rest[2];
          int r = 0;
          for (int t = 1; t <= 3; ++t)
            if (t != k) rest[r++] = pts[t];
          const double candidate = dist(a, partner) + dist(rest[0], rest[1]);
          if (same(candidate, current)) {
            pairs[i] = {a, partner};
            pairs[j] = {rest[0], rest[1]};
            changed = true;
            break;
          }
        }
      }
  }
  std::sort(pairs.begin(), pairs.end());
}

}  // namespace

Matching min_weight_perfect_matching(const Matrix& dist, const MatchingOptions& options) {
  const auto n = static_cast<int>(dist.rows());
  if (dist.cols() != dist.rows()) throw InputError("distance matrix must be square");
  if (n < 2) throw InputError("matching needs at least 2 points");
  if (n % 2 != 0) throw InputError("perfect matching needs an even number of points, got " + std::to_string(n));
  if (n > options.max_points)
    throw InputError("matching size " + std::to_string(n) + " exceeds cap " + std::to_string(options.max_points));
  if (!dist.allFinite()) throw InputError("distance matrix has non-finite entries");

  double max_d = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (dist(i, j) < 0) throw InputError("distance matrix has negative entries");
      max_d = std::max(max_d, dist(i, j));
    }

  // Integer costs in [0, scale]. Matcher weights are offset - cost, which
  // keeps every edge weight positive.
  const std::int64_t scale = (std::int64_t{1} << 52) / (n + 2);
  const std::int64_t offset = (n / 2 + 1) * scale + 1;
  std::vector<std::int64_t> cost(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
  auto c = [&](int i, int j) -> std::int64_t& { return cost[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)]; };
  BlossomMatcher matcher(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const std::int64_t cij = max_d > 0 ? std::llround(dist(i, j) / max_d * static_cast<double>(scale)) : 0;
      c(i, j) = c(j, i) = cij;
      matcher.set_weight(i + 1, j + 1, offset - cij);
    }

  // Greedy start: y[u] = half the cheapest incident cost, then each free
  // vertex raises its dual until an edge is tight and takes a free tight
  // partner when one exists. Matcher duals are lab = offset - 2 y.
  std::vector<std::int64_t> y(static_cast<std::size_t>(n));
  std::vector<int> mate(static_cast<std::size_t>(n), -1);
  for (int u = 0; u < n; ++u) {
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (int v = 0; v < n; ++v)
      if (v != u) best = std::min(best, c(u, v));
    y[static_cast<std::size_t>(u)] = best / 2;
  }
  for (int u = 0; u < n; ++u) {
    if (mate[static_cast<std::size_t>(u)] >= 0) continue;
    std::int64_t raise = std::numeric_limits<std::int64_t>::max();
    for (int v = 0; v < n; ++v)
      if (v != u) raise = std::min(raise, c(u, v) - y[static_cast<std::size_t>(u)] - y[static_cast<std::size_t>(v)]);
    y[static_cast<std::size_t>(u)] += raise;
    for (int v = 0; v < n; ++v)
      if (v != u && mate[static_cast<std::size_t>(v)] < 0 &&
          c(u, v) == y[static_cast<std::size_t>(u)] + y[static_cast<std::size_t>(v)]) {
        mate[static_cast<std::size_t>(u)] = v;
        mate[static_cast<std::size_t>(v)] = u;
        break;
      }
  }
  std::vector<std::int64_t> lab(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> mate1(static_cast<std::size_t>(n) + 1, 0);
  for (int u = 0; u < n; ++u) {
    lab[static_cast<std::size_t>(u) + 1] = offset - 2 * y[static_cast<std::size_t>(u)];
    mate1[static_cast<std::size_t>(u) + 1] = mate[static_cast<std::size_t>(u)] + 1;
  }
  matcher.solve(lab, mate1);

  Matching out;
  out.retained.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.retained[static_cast<std::size_t>(i)] = i;
  for (int u = 1; u <= n; ++u) {
    const int v = matcher.mate(u);
    if (v == 0) throw std::logic_error("blossom matcher returned an imperfect matching");
    if (u < v) out.pairs.emplace_back(u - 1, v - 1);
  }
  if (options.canonicalize) canonicalize_ties(dist, out.pairs);
  std::sort(out.pairs.begin(), out.pairs.end());
  out.total_weight = matching_weight(dist, out.pairs);
  return out;
}

Retention handle_odd(int n, std::uint64_t seed) {
  if (n < 2) throw InputError("at least 2 points are needed to form a matching");
  Retention r;
  r.retained.reserve(static_cast<std::size_t>(n));
  std::optional<int> drop;
  if (n % 2 == 1) {
    Rng rng = make_rng(seed, 0x0DDu);
    drop = std::uniform_int_distribution<int>(0, n - 1)(rng);
  }
  for (int i = 0; i < n; ++i)
    if (!drop || i != *drop) r.retained.push_back(i);
  r.dropped = drop;
  return r;
}

}  // namespace gfs
