#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "cpdlp/rng.hpp"
#include "cpdlp/series.hpp"
#include "cpdlp/stats.hpp"
#include "cpdlp/types.hpp"

namespace cpdlp {

// Independent long-range percolation on Z: edge {x, x+k} is open with
// probability b_k. Only lengths <= cutoff are sampled; `window`, if set,
// restricts the vertex set.
class PercolationSpec {
 public:
  static PercolationSpec from_table(std::vector<double> b, std::int64_t cutoff = -1);
  // b_k = f(k), with f(k) <= tail(k) for k > head.
  static PercolationSpec from_function(std::function<double(std::int64_t)> f, TermForm tail, std::int64_t head,
                                       std::int64_t cutoff);
  // b_k = f(k), with f(k) <= sum of the forms for k > head.
  static PercolationSpec from_function(std::function<double(std::int64_t)> f, std::vector<TermForm> tails,
                                       std::int64_t head, std::int64_t cutoff);

  double b(std::int64_t k) const;
  std::int64_t cutoff() const { return cutoff_; }
  PercolationSpec with_cutoff(std::int64_t R) const;
  PercolationSpec with_window(Vertex lo, Vertex hi) const;
  const std::optional<std::pair<Vertex, Vertex>>& window() const { return window_; }
  bool in_window(Vertex x) const { return !window_ || (x >= window_->first && x <= window_->second); }

  // Certified mu = sum_{y != 0} b_{0,y} = 2 sum_k b_k over all lengths.
  double mu() const;
  // Certified sum_{k > R} b_k and sum_{k > R} k b_k.
  double tail_mass(std::int64_t R) const;
  double tail_first_moment(std::int64_t R) const;
  // The dominating forms, for callers building further certified sums.
  const std::vector<TermForm>& tails() const { return tails_; }
  double tail_at(std::int64_t k) const;
  std::int64_t head_length() const { return head_; }

  // b_0..b_cutoff and the certified tail mass beyond the cutoff (+inf when
  // not certifiable), computed once per spec and shared by its copies.
  struct Prepared {
    std::vector<double> b;
    std::vector<double> block_max;  // max b_k over 65..129, 130..259, ...
    double tail_mass = 0.0;
  };
  const Prepared& prepared() const;

 private:
  struct Cache {
    std::once_flag once;
    Prepared value;
  };
  std::function<double(std::int64_t)> f_;
  std::vector<TermForm> tails_;
  bool zero_tail() const;
  std::int64_t head_ = 0;
  std::int64_t cutoff_ = 1;
  std::optional<std::pair<Vertex, Vertex>> window_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

struct Cluster {
  Vertex seed = 0;
  VertexSet vertices;
  std::uint64_t explored_edges = 0;
  bool cap_hit = false;            // size is then a lower bound
  double missed_edge_bound = 0.0;  // expected open edges longer than the cutoff at explored vertices
  std::size_t size() const { return vertices.size(); }
};

// Uniform attached to edge e in configuration `seed`; e is open iff u < b.
double edge_uniform(std::uint64_t seed, const Edge& e);

// Breadth-first exploration of the cluster of x. Each candidate edge is
// inspected at most once and sampled fresh from the stream keyed by seed.
// Stops once `cap` vertices are reached.
Cluster sample_cluster(Vertex x, const PercolationSpec& spec, std::uint64_t seed, std::size_t cap = 1u << 20);

constexpr std::size_t kExactPmfMaxEdges = 12;

struct WeightedEdge {
  Edge edge;
  double prob = 0.0;
};

// Exact pmf of |C(x)| over an explicit list of at most 12 independent edges.
// pmf[s] = P(|C(x)| = s); pmf[0] = 0.
std::vector<double> exact_cluster_pmf(Vertex x, const std::vector<WeightedEdge>& edges);
// Same for the candidate edges of a windowed spec.
std::vector<double> exact_cluster_pmf(Vertex x, const PercolationSpec& spec);
std::vector<WeightedEdge> candidate_edges(const PercolationSpec& spec);

struct CutDensityBracket {
  double lo = 0.0, hi = 1.0;   // certified bracket on prod_k (1-b_k)^k
  double value() const { return 0.5 * (lo + hi); }
};
CutDensityBracket analytic_cut_density(const PercolationSpec& spec);

struct CutReport {
  Vertex lo = 0, hi = 0;
  std::uint64_t replicas = 0;
  std::uint64_t cuts = 0;            // raw count over all replicas
  double density = 0.0;              // empirical cuts per vertex
  double density_sigma = 0.0;        // from the spread of per-replica densities
  CutDensityBracket analytic;
  double false_cut_bound = 0.0;      // sum_{k > R} k b_k, expected false cuts per vertex
  std::vector<std::int64_t> gaps;    // distances between consecutive cuts
  double lag1_correlation = 0.0;
  double lag1_sigma = 0.0;
  bool iid_passed = false;
  bool density_passed = false;
};

// Cut-points m (no open edge {x,y} with x <= m < y) in [lo, hi].
CutReport cut_analysis(const PercolationSpec& spec, Vertex lo, Vertex hi, std::uint64_t replicas,
                       std::uint64_t seed);

// Cut indicators for [0, len) in one fresh configuration (edges up to the
// spec cutoff), sampled by geometric skipping per length class.
std::vector<std::uint8_t> sample_cut_indicators(const PercolationSpec& spec, std::int64_t len, Rng& rng);

}  // namespace cpdlp
