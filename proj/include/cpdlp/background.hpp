#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cpdlp/model.hpp"
#include "cpdlp/rng.hpp"
#include "cpdlp/types.hpp"

namespace cpdlp {

// State history of one edge. Only refreshes that change the state are kept,
// so `changes` alternates open/closed starting from the opposite of
// `initial_open`.
struct EdgeTimeline {
  Edge edge;
  bool initial_open = false;
  std::vector<double> changes;
  double horizon = 0.0;

  // Right-continuous state at t.
  bool state_at(double t) const;
  // True iff the edge is closed at every instant of [a, b).
  bool closed_throughout(double a, double b) const;
  // Total open time in [0, t].
  double open_time(double t) const;
};

enum class BackgroundInit { stationary, all_open, all_closed, explicit_set };

const char* to_string(BackgroundInit b);
BackgroundInit background_init_from_string(const std::string& s);

struct BackgroundOptions {
  BackgroundInit init = BackgroundInit::stationary;
  std::vector<Edge> explicit_open;      // used with explicit_set
  double memory_budget_bytes = 4.0e9;
};

// Dynamical long-range percolation on the edges covered by a window.
// Each edge refreshes at rate v_hat; a refresh leaves it open with
// probability p_hat. Refreshes are split into two Poisson streams: rate
// v_hat*p_k refreshes carry a uniform mark m (open iff m < q), and rate
// v_hat*(1-p_k) refreshes always close. Both streams and the initial uniform
// are drawn from counter-based streams keyed by (seed, edge), so runs with
// different q or initial laws share their randomness and are ordered.
class BackgroundPath {
 public:
  BackgroundPath(KernelSpec kernel, ModelParams params, Window window, double horizon, std::uint64_t seed,
                 BackgroundOptions options = {});

  const EdgeTimeline& timeline(const Edge& e) const;
  bool is_open(const Edge& e, double t) const;

  const Window& window() const { return window_; }
  double horizon() const { return horizon_; }
  std::uint64_t seed() const { return seed_; }
  bool stationary_init() const { return options_.init == BackgroundInit::stationary; }
  BackgroundInit init() const { return options_.init; }
  const ModelParams& params() const { return params_; }
  const KernelSpec& kernel() const { return kernel_; }
  double p_hat(std::int64_t k) const { return p_hat_[static_cast<std::size_t>(k)]; }
  double v_hat(std::int64_t k) const { return v_hat_[static_cast<std::size_t>(k)]; }
  std::size_t materialized() const;

  // Estimated peak bytes if every covered edge were materialized.
  static double memory_estimate(const KernelSpec& kernel, const ModelParams& params, const Window& w, double horizon);

 private:
  EdgeTimeline build(const Edge& e) const;

  KernelSpec kernel_;
  ModelParams params_;
  Window window_;
  double horizon_;
  std::uint64_t seed_;
  BackgroundOptions options_;
  std::unordered_set<Edge, EdgeHash> explicit_open_;
  std::vector<double> p_, p_hat_, v_hat_;
  std::unique_ptr<std::shared_mutex> mutex_ = std::make_unique<std::shared_mutex>();
  mutable std::unordered_map<Edge, std::unique_ptr<EdgeTimeline>, EdgeHash> cache_;
};

BackgroundPath evolve_background(const KernelSpec& kernel, const ModelParams& params, const Window& window,
                                 double horizon, std::uint64_t seed, BackgroundOptions options = {});

bool is_open(const BackgroundPath& path, const Edge& e, double t);

// w_n(e) for n = 0..n_blocks-1.
std::vector<std::uint8_t> block_indicators(const EdgeTimeline& tl, double T, int n_blocks);
std::vector<std::uint8_t> block_indicators(const BackgroundPath& path, const Edge& e, double T);

// Exact posterior of the two-state chain at block boundaries.
class TwoStateBlockFilter {
 public:
  TwoStateBlockFilter(double p_hat, double v_hat, double T, double initial_open_prob);

  double prob_open() const { return pi_; }
  // P(w_n = 1 | observations so far).
  double prob_closed_block() const;
  // Observe w_n itself.
  void observe_w(bool w) { observe_thinned(w, 1.0); }
  // Observe X'_n = w_n * Y_n with P(Y_n = 1 | w_n = 1, past) = keep.
  void observe_thinned(bool xprime, double keep);

 private:
  double pi_;
  double c2o_, o2o_, stay_closed_;
};

struct BlockConditionalReport {
  double delta = 0.0;
  double min_conditional = 1.0;
  std::vector<double> min_by_depth;  // minimum over patterns of length n
  int patterns = 0;
  bool passed = false;
};

BlockConditionalReport block_conditionals_rate(double p_hat, double v_hat, double T, int depth = 8,
                                               EdgeStart start = EdgeStart::stationary);
BlockConditionalReport block_conditionals(std::int64_t k, const KernelSpec& kernel, const ModelParams& params,
                                          double T, int depth = 8);

// Open/close-rate representation of the same chain (holding times
// Exp(v p) while closed and Exp(v (1-p)) while open). Used as a law
// comparison target.
EdgeTimeline sample_rate_chain(double p_hat, double v_hat, double horizon, bool initial_open, Rng& rng);

}  // namespace cpdlp
