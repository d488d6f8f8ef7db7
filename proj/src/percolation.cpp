#include "cpdlp/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "cpdlp/error.hpp"

namespace cpdlp {

PercolationSpec PercolationSpec::from_table(std::vector<double> b, std::int64_t cutoff) {
  for (double x : b)
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("percolation probabilities must lie in [0,1]");
  PercolationSpec s;
  s.head_ = static_cast<std::int64_t>(b.size());
  s.cutoff_ = cutoff < 0 ? std::max<std::int64_t>(1, s.head_) : cutoff;
  s.f_ = [t = std::move(b)](std::int64_t k) {
    return k >= 1 && k <= static_cast<std::int64_t>(t.size()) ? t[static_cast<std::size_t>(k - 1)] : 0.0;
  };
  s.tails_ = {TermForm{0.0, 0.0, 1.0}};
  return s;
}

PercolationSpec PercolationSpec::from_function(std::function<double(std::int64_t)> f, TermForm tail,
                                               std::int64_t head, std::int64_t cutoff) {
  return from_function(std::move(f), std::vector<TermForm>{tail}, head, cutoff);
}

PercolationSpec PercolationSpec::from_function(std::function<double(std::int64_t)> f, std::vector<TermForm> tails,
                                               std::int64_t head, std::int64_t cutoff) {
  if (cutoff < 1) throw ConfigError("cutoff must be >= 1");
  if (tails.empty()) tails.push_back(TermForm{0.0, 0.0, 1.0});
  PercolationSpec s;
  s.f_ = std::move(f);
  s.tails_ = std::move(tails);
  s.head_ = head;
  s.cutoff_ = cutoff;
  return s;
}

double PercolationSpec::tail_at(std::int64_t k) const {
  double s = 0.0;
  for (const auto& t : tails_) s += t(k);
  return s;
}

bool PercolationSpec::zero_tail() const {
  return std::all_of(tails_.begin(), tails_.end(), [](const TermForm& t) { return t.coeff == 0.0; });
}

double PercolationSpec::b(std::int64_t k) const { return k >= 1 ? std::clamp(f_(k), 0.0, 1.0) : 0.0; }

PercolationSpec PercolationSpec::with_cutoff(std::int64_t R) const {
  if (R < 1) throw ConfigError("cutoff must be >= 1");
  PercolationSpec s = *this;
  s.cutoff_ = R;
  s.cache_ = std::make_shared<Cache>();
  return s;
}

// Lengths up to this are sampled one by one; longer ones by skipping.
constexpr std::int64_t kDirectLengths = 64;

const PercolationSpec::Prepared& PercolationSpec::prepared() const {
  std::call_once(cache_->once, [this] {
    auto& p = cache_->value;
    p.b.assign(static_cast<std::size_t>(cutoff_) + 1, 0.0);
    for (std::int64_t k = 1; k <= cutoff_; ++k) p.b[static_cast<std::size_t>(k)] = b(k);
    for (std::int64_t lo = kDirectLengths + 1; lo <= cutoff_; lo *= 2) {
      std::int64_t hi = std::min(2 * lo - 1, cutoff_);
      p.block_max.push_back(*std::max_element(p.b.begin() + lo, p.b.begin() + hi + 1));
    }
    try {
      p.tail_mass = tail_mass(cutoff_);
    } catch (const DivergenceError&) {
      p.tail_mass = std::numeric_limits<double>::infinity();
    }
  });
  return cache_->value;
}

PercolationSpec PercolationSpec::with_window(Vertex lo, Vertex hi) const {
  if (hi < lo) throw ConfigError("empty percolation window");
  PercolationSpec s = *this;
  s.window_ = std::make_pair(lo, hi);
  return s;
}

double PercolationSpec::mu() const {
  auto f = [this](std::int64_t k) { return b(k); };
  CertifiedSum cs = certified_sum(f, tails_, 1, std::max<std::int64_t>(64, head_));
  if (!cs.finite) throw DivergenceError("sum of b_k is not certified finite");
  return 2.0 * cs.upper();
}

double PercolationSpec::tail_mass(std::int64_t R) const {
  if (zero_tail() && head_ <= R) return 0.0;
  auto f = [this](std::int64_t k) { return b(k); };
  CertifiedSum cs = certified_sum(f, tails_, R + 1, std::max<std::int64_t>({64, head_, R + 1}));
  if (!cs.finite) throw DivergenceError("tail of b_k is not certified finite");
  return cs.upper();
}

double PercolationSpec::tail_first_moment(std::int64_t R) const {
  if (zero_tail() && head_ <= R) return 0.0;
  auto f = [this](std::int64_t k) { return static_cast<double>(k) * b(k); };
  std::vector<TermForm> moment;
  for (const auto& t : tails_) moment.push_back(t.times_k());
  CertifiedSum cs = certified_sum(f, moment, R + 1, std::max<std::int64_t>({64, head_, R + 1}));
  if (!cs.finite) throw DivergenceError("sum of k b_k is not certified finite");
  return cs.upper();
}

double edge_uniform(std::uint64_t seed, const Edge& e) { return to_unit(derive(seed, Tag::percolation, {e.key()})); }

Cluster sample_cluster(Vertex x, const PercolationSpec& spec, std::uint64_t seed, std::size_t cap) {
  if (!spec.in_window(x)) throw WindowError("cluster seed outside the percolation window");
  Cluster c;
  c.seed = x;
  const auto& prep = spec.prepared();
  const auto& b = prep.b;
  Rng rng(derive(seed, Tag::percolation));
  std::unordered_set<Vertex> seen{x};
  std::deque<Vertex> queue{x};
  c.vertices.push_back(x);
  while (!queue.empty() && !c.cap_hit) {
    Vertex u = queue.front();
    queue.pop_front();
    auto offer = [&](Vertex y) {
      if (!spec.in_window(y) || !seen.insert(y).second) return;
      queue.push_back(y);
      c.vertices.push_back(y);
      if (c.vertices.size() >= cap) c.cap_hit = true;
    };
    std::int64_t direct = std::min<std::int64_t>(spec.cutoff(), kDirectLengths);
    for (std::int64_t k = 1; k <= direct && !c.cap_hit; ++k) {
      double bk = b[static_cast<std::size_t>(k)];
      if (bk == 0.0) continue;
      for (Vertex y : {u - k, u + k}) {
        if (c.cap_hit || seen.count(y)) continue;
        ++c.explored_edges;
        if (rng.uniform() < bk) offer(y);
      }
    }
    // Longer lengths in dyadic blocks: geometric skips at the block maximum,
    // then thinning by b_k / max. Candidate i is length lo + i/2, side i%2.
    for (std::size_t j = 0; j < prep.block_max.size() && !c.cap_hit; ++j) {
      double bm = prep.block_max[j];
      if (bm <= 0.0) continue;
      std::int64_t lo = (kDirectLengths + 1) << j, hi = std::min(2 * lo - 1, spec.cutoff());
      std::int64_t n = 2 * (hi - lo + 1);
      for (std::int64_t i = static_cast<std::int64_t>(rng.geometric(bm)); i < n && !c.cap_hit;
           i += 1 + static_cast<std::int64_t>(rng.geometric(bm))) {
        std::int64_t k = lo + i / 2;
        ++c.explored_edges;
        if (rng.uniform() * bm >= b[static_cast<std::size_t>(k)]) continue;
        Vertex y = i % 2 ? u + k : u - k;
        if (!seen.count(y)) offer(y);
      }
    }
  }
  std::sort(c.vertices.begin(), c.vertices.end());
  c.missed_edge_bound = 2.0 * prep.tail_mass * static_cast<double>(c.vertices.size());
  return c;
}

std::vector<double> exact_cluster_pmf(Vertex x, const std::vector<WeightedEdge>& edges) {
  if (edges.size() > kExactPmfMaxEdges)
    throw ResourceError("exact cluster pmf supports at most 12 candidate edges", static_cast<double>(edges.size()));
  VertexSet verts{x};
  for (const auto& we : edges) {
    verts.push_back(we.edge.a);
    verts.push_back(we.edge.b);
  }
  verts = normalized(verts);
  auto idx = [&](Vertex v) { return static_cast<int>(std::lower_bound(verts.begin(), verts.end(), v) - verts.begin()); };
  int n = static_cast<int>(verts.size());
  int m = static_cast<int>(edges.size());
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> parent(static_cast<std::size_t>(n));
  auto find = [&](int a) {
    while (parent[static_cast<std::size_t>(a)] != a) a = parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
    return a;
  };
  int root_x = idx(x);
  for (std::uint32_t mask = 0; mask < (1U << m); ++mask) {
    double w = 1.0;
    std::iota(parent.begin(), parent.end(), 0);
    for (int i = 0; i < m; ++i) {
      const auto& we = edges[static_cast<std::size_t>(i)];
      if (mask >> i & 1U) {
        w *= we.prob;
        int a = find(idx(we.edge.a)), b = find(idx(we.edge.b));
        if (a != b) parent[static_cast<std::size_t>(a)] = b;
      } else {
        w *= 1.0 - we.prob;
      }
    }
    if (w == 0.0) continue;
    int r = find(root_x), size = 0;
    for (int v = 0; v < n; ++v) size += find(v) == r;
    pmf[static_cast<std::size_t>(size)] += w;
  }
  while (pmf.size() > 2 && pmf.back() == 0.0) pmf.pop_back();
  return pmf;
}

std::vector<WeightedEdge> candidate_edges(const PercolationSpec& spec) {
  if (!spec.window()) throw ConfigError("candidate edges need a finite window");
  auto [lo, hi] = *spec.window();
  std::vector<WeightedEdge> out;
  for (Vertex a = lo; a <= hi; ++a)
    for (std::int64_t k = 1; k <= spec.cutoff() && a + k <= hi; ++k) {
      double bk = spec.b(k);
      if (bk > 0.0) {
        out.push_back({Edge(a, a + k), bk});
        if (out.size() > kExactPmfMaxEdges)
          throw ResourceError("more than 12 candidate edges", static_cast<double>(out.size()));
      }
    }
  return out;
}

std::vector<double> exact_cluster_pmf(Vertex x, const PercolationSpec& spec) {
  return exact_cluster_pmf(x, candidate_edges(spec));
}

CutDensityBracket analytic_cut_density(const PercolationSpec& spec) {
  std::int64_t n = std::max<std::int64_t>(1024, spec.head_length());
  CompensatedSum head;
  for (std::int64_t k = 1; k <= n; ++k) {
    double bk = spec.b(k);
    if (bk >= 1.0) return {0.0, 0.0};
    head.add(static_cast<double>(k) * std::log1p(-bk));
  }
  double tail = spec.tail_first_moment(n);
  // -log(1-b) <= b / (1 - b); beyond n the dominating form is decreasing
  // for every certifiable family, so b_k <= tail(n+1) there.
  double bmax = spec.tail_at(n + 1);
  double hi = std::exp(head.value());
  double lo = bmax < 1.0 ? std::exp(head.value() - tail / (1.0 - bmax)) : 0.0;
  return {lo, hi};
}

std::vector<std::uint8_t> sample_cut_indicators(const PercolationSpec& spec, std::int64_t len, Rng& rng) {
  std::vector<std::int64_t> diff(static_cast<std::size_t>(len) + 1, 0);
  const auto& prep = spec.prepared();
  const auto& tab = prep.b;
  // Edges {x, x+k} crossing some point of [0, len): x in [1-k, len-1].
  auto mark = [&](std::int64_t k, std::int64_t x) {
    std::int64_t a = std::max<std::int64_t>(x, 0), b = std::min(x + k - 1, len - 1);
    diff[static_cast<std::size_t>(a)] += 1;
    diff[static_cast<std::size_t>(b) + 1] -= 1;
  };
  std::int64_t direct = std::min<std::int64_t>(spec.cutoff(), kDirectLengths);
  for (std::int64_t k = 1; k <= direct; ++k) {
    double bk = tab[static_cast<std::size_t>(k)];
    if (bk <= 0.0) continue;
    std::int64_t first = 1 - k, count = len + k - 1;
    if (bk >= 1.0) {
      for (std::int64_t i = 0; i < count; ++i) mark(k, first + i);
      continue;
    }
    for (auto i = static_cast<std::int64_t>(rng.geometric(bk)); i < count;
         i += 1 + static_cast<std::int64_t>(rng.geometric(bk)))
      mark(k, first + i);
  }
  // Longer lengths: one skip sequence over the (length, start) grid of each
  // dyadic block at the block maximum, thinned to b_k.
  for (std::size_t j = 0; j < prep.block_max.size(); ++j) {
    double bm = prep.block_max[j];
    if (bm <= 0.0) continue;
    std::int64_t lo = (kDirectLengths + 1) << j, hi = std::min(2 * lo - 1, spec.cutoff());
    std::int64_t width = len + hi - 1, n = (hi - lo + 1) * width;
    for (auto i = static_cast<std::int64_t>(rng.geometric(bm)); i < n;
         i += 1 + static_cast<std::int64_t>(rng.geometric(bm))) {
      std::int64_t k = lo + i / width, off = i % width;
      if (off >= len + k - 1) continue;
      if (rng.uniform() * bm >= tab[static_cast<std::size_t>(k)]) continue;
      mark(k, 1 - k + off);
    }
  }
  std::vector<std::uint8_t> cut(static_cast<std::size_t>(len));
  std::int64_t run = 0;
  for (std::int64_t m = 0; m < len; ++m) {
    run += diff[static_cast<std::size_t>(m)];
    cut[static_cast<std::size_t>(m)] = run == 0;
  }
  return cut;
}

CutReport cut_analysis(const PercolationSpec& spec, Vertex lo, Vertex hi, std::uint64_t replicas,
                       std::uint64_t seed) {
  if (hi < lo) throw ConfigError("empty cut range");
  if (replicas == 0) throw ConfigError("replicas must be positive");
  CutReport rep;
  rep.lo = lo;
  rep.hi = hi;
  rep.replicas = replicas;
  rep.false_cut_bound = spec.tail_first_moment(spec.cutoff());  // throws on divergence
  spec.tail_first_moment(0);
  rep.analytic = analytic_cut_density(spec);
  std::int64_t len = hi - lo + 1;
  RunningStats dens;
  std::vector<double> g0, g1;
  for (std::uint64_t r = 0; r < replicas; ++r) {
    Rng rng(derive(seed, Tag::percolation, {r}));
    auto cut = sample_cut_indicators(spec, len, rng);
    std::uint64_t c = 0;
    std::int64_t last = -1, prev_gap = -1;
    for (std::int64_t m = 0; m < len; ++m) {
      if (!cut[static_cast<std::size_t>(m)]) continue;
      ++c;
      if (last >= 0) {
        std::int64_t gap = m - last;
        rep.gaps.push_back(gap);
        if (prev_gap >= 0) {
          g0.push_back(static_cast<double>(prev_gap));
          g1.push_back(static_cast<double>(gap));
        }
        prev_gap = gap;
      }
      last = m;
    }
    rep.cuts += c;
    dens.add(static_cast<double>(c) / static_cast<double>(len));
  }
  rep.density = dens.mean();
  rep.density_sigma = replicas > 1 ? dens.stderr_mean() : 0.0;
  if (g0.size() >= 3) {
    rep.lag1_correlation = pearson(g0, g1);
    if (!std::isfinite(rep.lag1_correlation)) rep.lag1_correlation = 0.0;
    rep.lag1_sigma = 1.0 / std::sqrt(static_cast<double>(g0.size()));
    rep.iid_passed = std::fabs(rep.lag1_correlation) <= 3.0 * rep.lag1_sigma;
  } else {
    rep.iid_passed = true;
  }
  // Truncation can only add cuts, so the empirical density targets
  // [analytic.lo, analytic.hi + false_cut_bound].
  double s = rep.density_sigma;
  rep.density_passed = rep.density >= rep.analytic.lo - 3.0 * s &&
                       rep.density <= rep.analytic.hi + rep.false_cut_bound + 3.0 * s;
  return rep;
}

}  // namespace cpdlp
