#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "cpdlp/background.hpp"
#include "cpdlp/engine.hpp"

namespace cpdlp {

// P(X_n = 1 | X'_0 .. X'_{n-1}) for the sequence being thinned.
class ConditionalOracle {
 public:
  virtual ~ConditionalOracle() = default;
  virtual double prob_one() const = 0;
  // Record X'_n, where X'_n = X_n Y_n and P(Y_n = 1 | X_n = 1, past) = keep.
  virtual void observe(bool xprime, double keep) = 0;
};

// Exact oracle for w_n of a two-state edge: X_n = 1 iff closed on block n.
class TwoStateOracle : public ConditionalOracle {
 public:
  TwoStateOracle(double p_hat, double v_hat, double T, double initial_open_prob)
      : f_(p_hat, v_hat, T, initial_open_prob) {}
  double prob_one() const override { return f_.prob_closed_block(); }
  void observe(bool xprime, double keep) override { f_.observe_thinned(xprime, keep); }

 private:
  TwoStateBlockFilter f_;
};

// Oracle for a sequence that is already i.i.d. Bernoulli(p).
class IidOracle : public ConditionalOracle {
 public:
  explicit IidOracle(double p) : p_(p) {}
  double prob_one() const override { return p_; }
  void observe(bool, double) override {}

 private:
  double p_;
};

struct BerCompResult {
  std::vector<std::uint8_t> xprime;
  std::vector<double> p_cond;  // oracle value p'_n used at each step
};

// X'_n = X_n 1{chi_n <= q / p'_n}. Throws CouplingViolation if p'_n < q.
BerCompResult bercomp_couple(const std::vector<std::uint8_t>& X, ConditionalOracle& oracle, double q,
                             const std::function<double(std::size_t)>& chi);

// Block indicators w_n(e) and their independent lower bounds w'_n(e) for
// every edge covered by the background window, materialized lazily.
class BlockTable {
 public:
  struct EdgeBlocks {
    std::vector<std::uint8_t> w, wprime;
    std::vector<double> p_cond;
    double delta = 1.0;
  };

  BlockTable(std::shared_ptr<const BackgroundPath> path, double T, std::uint64_t chi_seed);
  // Table with w = w' = value everywhere; no background behind it.
  static BlockTable constant(const Window& window, double T, int blocks, bool value);

  double T() const { return T_; }
  int blocks() const { return blocks_; }
  const Window& window() const { return window_; }
  const BackgroundPath* path() const { return path_.get(); }

  const EdgeBlocks& edge(const Edge& e) const;
  bool w(const Edge& e, int n) const { return edge(e).w.at(static_cast<std::size_t>(n)); }
  bool wprime(const Edge& e, int n) const { return edge(e).wprime.at(static_cast<std::size_t>(n)); }
  double delta(std::int64_t k) const;
  // Block containing time t (the last block for t equal to the horizon).
  int block_of(double t) const;
  // Materialize every covered edge on up to `workers` threads.
  void materialize_all(unsigned workers = 1) const;
  std::size_t materialized() const;

 private:
  BlockTable() = default;
  EdgeBlocks build(const Edge& e) const;

  std::shared_ptr<const BackgroundPath> path_;
  Window window_;
  double T_ = 1.0;
  int blocks_ = 0;
  std::uint64_t chi_seed_ = 0;
  std::optional<bool> constant_;
  std::unique_ptr<std::shared_mutex> mutex_ = std::make_unique<std::shared_mutex>();
  mutable std::unordered_map<Edge, std::unique_ptr<EdgeBlocks>, EdgeHash> cache_;
};

// chi_n(e) = uniform keyed by (seed, edge, n).
double block_chi(std::uint64_t seed, const Edge& e, int n);

BlockTable build_wprime(std::shared_ptr<const BackgroundPath> path, double T, std::uint64_t chi_seed);
std::vector<BlockTable> build_wprime(const std::vector<std::shared_ptr<const BackgroundPath>>& bank, double T,
                                     std::uint64_t chi_seed);

// The dominating process: an infection event on e at time t is usable iff
// w'_{floor(t/T)}(e) = 0.
Trajectory simulate_Ctilde(const VertexSet& C0, const BlockTable& table, const EventLog& log,
                           const std::vector<double>& sample_times);

// C~ restricted to the vertex interval `box` on [t0, t1], started from the
// whole box. Returns true iff it is still alive at t1.
bool box_Ctilde_survives(const BlockTable& table, const EventLog& log, Vertex lo, Vertex hi, double t0, double t1);

}  // namespace cpdlp
