#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "cpdlp/engine.hpp"
#include "cpdlp/model.hpp"
#include "cpdlp/series.hpp"

namespace cpdlp {

// Distance-indexed infection rates a_k with a certified dominating tail,
// plus the recovery rate.
class InfectionKernel {
 public:
  // a_k = table[k-1] for k <= table.size(), 0 beyond.
  static InfectionKernel from_table(std::vector<double> table, double r);
  // a_k = f(k) with f(k) <= tail(k) for every k.
  static InfectionKernel from_function(std::function<double(std::int64_t)> f, TermForm tail, double r);

  double rate(std::int64_t k) const { return f_(k); }
  double recovery_rate() const { return r_; }
  const TermForm& tail() const { return tail_; }
  std::int64_t head_length() const { return head_; }
  // Certified sum_k a_k; throws DivergenceError if not finite.
  CertifiedSum total() const;
  // Certified sum_{k > R} a_k.
  double tail_sum(std::int64_t R) const;
  bool is_zero() const { return zero_; }

 private:
  std::function<double(std::int64_t)> f_;
  TermForm tail_;
  double r_ = 1.0;
  std::int64_t head_ = 0;
  bool zero_ = false;
};

// a_k = a_bar(k), dominated by 2 lambda q p_k.
InfectionKernel kernel_from_abar(const ModelParams& params, const KernelSpec& kernel);

EventLog kernel_event_log(const InfectionKernel& kernel, const Window& window, double horizon, std::uint64_t seed);

// One trajectory of the kernel CP (every infection event is usable).
Trajectory simulate_kernel_forward(const VertexSet& C0, const EventLog& log, const std::vector<double>& sample_times);

struct KernelSurvivalOptions {
  double confidence = 0.95;
  unsigned workers = 1;
};

// Replica i uses the event seed replica_event_seed(seed, i), so a CPDLP run
// with the same seed and lambda shares its infection and recovery streams.
SurvivalEstimate simulate_kernel_cp(const VertexSet& C0, const InfectionKernel& kernel, const Window& window,
                                    double horizon, std::uint64_t replicas, std::uint64_t seed,
                                    const KernelSurvivalOptions& opts = {});

struct DominationRow {
  std::uint64_t m = 0;
  double empirical = 0.0;  // P^(Y_t >= m)
  double sigma = 0.0;
  double poisson = 0.0;    // P(Poisson(a_bar t) >= m)
  bool passed = false;
};

struct DominationReport {
  double a_bar = 0.0;
  double t = 0.0;
  std::uint64_t replicas = 0;
  double mean_used = 0.0;  // E^[Y_t]
  double mean_stderr = 0.0;
  double expected_used = 0.0;  // lambda * expected open time (stationary start)
  std::vector<DominationRow> rows;
  bool mean_passed = false;
  bool passed = false;
};

// Y_t = number of infection events on one edge at times when the edge is open.
DominationReport edge_domination_check_rate(double lambda, double p_hat, double v_hat, double t,
                                            std::uint64_t replicas, std::uint64_t seed, std::uint64_t cap = 12);
DominationReport edge_domination_check(std::int64_t k, const KernelSpec& kernel, const ModelParams& params, double t,
                                       std::uint64_t replicas, std::uint64_t seed, std::uint64_t cap = 12);

// Complete graph on N vertices, all infected at time 0; the infected count
// jumps k -> k+1 at rate lambda k (N-k) and k -> k-1 at rate r k.
struct CompleteGraphReport {
  std::int64_t N = 0;
  double lambda = 0.0, r = 1.0, horizon = 0.0;
  std::uint64_t replicas = 0;
  std::uint64_t exceed = 0;           // replicas with tau > horizon
  double mc_estimate = 0.0;
  double mc_upper = 1.0;              // one-sided Clopper-Pearson
  double confidence = 0.99;
  std::optional<double> exact_tail;   // P(tau > horizon), small N
  double log_mean_time = 0.0;         // log E[tau]
  double markov_bound = 1.0;          // min(1, E[tau] / horizon)
};

// log E_N[tau] via T_k = (1 + beta_k T_{k+1}) / mu_k, E_N[tau] = sum_k T_k.
double log_mean_extinction_time(std::int64_t N, double lambda, double r);
// P(tau > h) by uniformization of the count chain.
double exact_extinction_tail(std::int64_t N, double lambda, double r, double h);

constexpr std::int64_t kExactCompleteGraphMax = 12;

CompleteGraphReport complete_graph_extinction(std::int64_t N, double lambda, double r, double horizon,
                                              std::uint64_t replicas, std::uint64_t seed, double confidence = 0.99,
                                              unsigned workers = 1);

// Monte Carlo extinction time from N infected (Gillespie on the count).
double sample_complete_graph_extinction(std::int64_t N, double lambda, double r, double cap, Rng& rng);

// P(the CP on a fixed graph with m <= 12 vertices, started from `initial`,
// is still alive at time T). Edges are vertex index pairs.
double fixed_graph_survival(int m, const std::vector<std::pair<int, int>>& edges, double lambda, double r, double T,
                            std::uint32_t initial);

}  // namespace cpdlp
