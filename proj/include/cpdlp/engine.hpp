#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "cpdlp/background.hpp"
#include "cpdlp/model.hpp"
#include "cpdlp/stats.hpp"
#include "cpdlp/types.hpp"

namespace cpdlp {

// Poisson infection streams per edge (rate by edge length) and recovery
// streams per vertex, materialized lazily from (seed, edge) / (seed, vertex).
class EventLog {
 public:
  EventLog(Window window, double horizon, std::uint64_t seed, std::vector<double> rate_by_length, double recovery_rate);

  // Constant infection rate lambda on every edge of length <= cutoff.
  static EventLog uniform(Window window, double horizon, std::uint64_t seed, double lambda, double r);

  const std::vector<double>& infection_times(const Edge& e) const;
  const std::vector<double>& recovery_times(Vertex x) const;

  const Window& window() const { return window_; }
  double horizon() const { return horizon_; }
  std::uint64_t seed() const { return seed_; }
  double infection_rate(std::int64_t k) const { return rates_[static_cast<std::size_t>(k)]; }
  double recovery_rate() const { return r_; }

 private:
  Window window_;
  double horizon_;
  std::uint64_t seed_;
  std::vector<double> rates_;
  double r_;
  std::unique_ptr<std::shared_mutex> mutex_ = std::make_unique<std::shared_mutex>();
  mutable std::unordered_map<Edge, std::unique_ptr<std::vector<double>>, EdgeHash> infections_;
  mutable std::unordered_map<Vertex, std::unique_ptr<std::vector<double>>> recoveries_;
};

struct Trajectory {
  std::vector<double> sample_times;
  std::vector<VertexSet> infected;       // C_t at each sample time
  std::optional<double> extinction_time;  // empty: censored at the horizon
  double horizon = 0.0;
  std::uint64_t suppressed_attempts = 0;  // effective attempts over edges leaving the window
  double occupation = 0.0;                // integral of |C_s| ds
  std::size_t max_size = 0;
  std::uint64_t background_seed = 0;
  std::uint64_t event_seed = 0;
};

Trajectory simulate_forward(const VertexSet& C0, const BackgroundPath& path, const EventLog& log,
                            const std::vector<double>& sample_times);

// All y with a B-infection path from (y, 0) to A x {t}.
VertexSet simulate_dual(const VertexSet& A, double t, const BackgroundPath& path, const EventLog& log,
                        std::uint64_t* suppressed = nullptr);

struct CoupledRunSpec {
  VertexSet initial;
  double q = 1.0;
  BackgroundInit init = BackgroundInit::stationary;
};

// Every run uses the same event streams and background uniforms.
std::vector<Trajectory> coupled_runs(const std::vector<CoupledRunSpec>& runs, const KernelSpec& kernel,
                                     const ModelParams& params, const Window& window, double horizon,
                                     std::uint64_t seed, const std::vector<double>& sample_times);

// Replica r uses background seed derive(seed, replica, {r, 0}) and event
// seed derive(seed, replica, {r, 1}).
std::uint64_t replica_background_seed(std::uint64_t seed, std::uint64_t replica);
std::uint64_t replica_event_seed(std::uint64_t seed, std::uint64_t replica);

struct TruncationLedger {
  std::int64_t window_lo = 0, window_hi = 0, cutoff = 0;
  double mean_suppressed = 0.0;   // measured attempts over edges leaving the vertex window
  double long_edge_bound = 0.0;   // certified bound for edges longer than the cutoff
  double total() const { return mean_suppressed + long_edge_bound; }
};

struct SurvivalEstimate {
  ModelParams params;
  VertexSet initial;
  double horizon = 0.0;
  std::uint64_t replicas = 0;
  std::uint64_t survivors = 0;
  double theta = 0.0;
  double stderr_ = 0.0;
  Interval ci;
  double confidence = 0.95;
  TruncationLedger ledger;
  double mean_occupation = 0.0;
};

struct SurvivalOptions {
  BackgroundInit init = BackgroundInit::stationary;
  double confidence = 0.95;
  unsigned workers = 1;
};

SurvivalEstimate survival_estimate(const VertexSet& C0, const KernelSpec& kernel, const ModelParams& params,
                                   const Window& window, double horizon, std::uint64_t replicas, std::uint64_t seed,
                                   const SurvivalOptions& opts = {});

struct ScanRow {
  double lambda = 0.0;
  SurvivalEstimate estimate;
  bool bisection = false;
};

struct ScanReport {
  std::vector<ScanRow> rows;                 // grid rows, then bisection rows
  double threshold = 0.5;
  std::optional<double> crossing;            // finite-window proxy, not lambda_c
  std::optional<Interval> crossing_bracket;  // from the CIs of evaluated points
  std::vector<std::string> warnings;
};

struct ScanOptions {
  double threshold = 0.5;
  int bisection_steps = 0;
  VertexSet initial{0};
  SurvivalOptions survival;
};

ScanReport lambda_c_scan(const KernelSpec& kernel, const ModelParams& base, const std::vector<double>& lambdas,
                         const Window& window, double horizon, std::uint64_t replicas, std::uint64_t seed,
                         const ScanOptions& opts = {});

// Sum_{k > R} a_k for a kernel sequence with certified remainder.
double sequence_tail(const Sequence& s, std::int64_t R, bool reciprocal = false);

}  // namespace cpdlp
