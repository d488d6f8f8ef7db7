#include "cpdlp/engine.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "cpdlp/detail/sweep.hpp"
#include "cpdlp/error.hpp"
#include "cpdlp/parallel.hpp"
#include "cpdlp/rng.hpp"
#include "cpdlp/series.hpp"

namespace cpdlp {

namespace {

std::vector<double> poisson_times(double rate, double horizon, std::uint64_t key) {
  std::vector<double> out;
  if (!(rate > 0.0)) return out;
  Rng rng(key);
  double t = rng.exponential(rate);
  while (t <= horizon) {
    out.push_back(t);
    t += rng.exponential(rate);
  }
  return out;
}

template <class Map, class Key, class Make>
const std::vector<double>& memoized(std::shared_mutex& m, Map& map, const Key& key, Make&& make) {
  {
    std::shared_lock lock(m);
    auto it = map.find(key);
    if (it != map.end()) return *it->second;
  }
  auto fresh = std::make_unique<std::vector<double>>(make());
  std::unique_lock lock(m);
  auto [it, inserted] = map.try_emplace(key, std::move(fresh));
  return *it->second;
}

void check_samples(const std::vector<double>& samples, double horizon) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i] >= 0.0 && samples[i] <= horizon)) throw ConfigError("sample time outside [0, horizon]");
    if (i && samples[i] < samples[i - 1]) throw ConfigError("sample times must be sorted");
  }
}

void check_compatible(const BackgroundPath& path, const EventLog& log) {
  const Window& a = path.window();
  const Window& b = log.window();
  if (a.lo > b.lo || a.hi < b.hi || a.cutoff < b.cutoff)
    throw ConfigError("background window does not cover the event window");
  if (path.horizon() < log.horizon()) throw ConfigError("background horizon shorter than the event horizon");
}

}  // namespace

EventLog::EventLog(Window window, double horizon, std::uint64_t seed, std::vector<double> rate_by_length,
                   double recovery_rate)
    : window_(window), horizon_(horizon), seed_(seed), rates_(std::move(rate_by_length)), r_(recovery_rate) {
  if (window.hi < window.lo || window.cutoff < 1) throw ConfigError("empty window");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (rates_.size() < static_cast<std::size_t>(window.cutoff) + 1) throw ConfigError("rate table shorter than cutoff");
  if (!(r_ >= 0.0)) throw ConfigError("recovery rate must be >= 0");
}

EventLog EventLog::uniform(Window window, double horizon, std::uint64_t seed, double lambda, double r) {
  std::vector<double> rates(static_cast<std::size_t>(window.cutoff) + 1, lambda);
  rates[0] = 0.0;
  return EventLog(window, horizon, seed, std::move(rates), r);
}

const std::vector<double>& EventLog::infection_times(const Edge& e) const {
  if (!window_.covers(e)) throw WindowError("infection stream requested outside the window");
  return memoized(*mutex_, infections_, e, [&] {
    return poisson_times(rates_[static_cast<std::size_t>(e.length())], horizon_,
                         derive(seed_, Tag::infection, {e.key()}));
  });
}

const std::vector<double>& EventLog::recovery_times(Vertex x) const {
  if (!window_.contains(x)) throw WindowError("recovery stream requested outside the window");
  return memoized(*mutex_, recoveries_, x, [&] {
    return poisson_times(r_, horizon_, derive(seed_, Tag::recovery, {static_cast<std::uint64_t>(x)}));
  });
}

Trajectory simulate_forward(const VertexSet& C0, const BackgroundPath& path, const EventLog& log,
                            const std::vector<double>& sample_times) {
  check_compatible(path, log);
  check_samples(sample_times, log.horizon());
  auto gate = [&](const Edge& e, double t) { return path.is_open(e, t); };
  auto res = detail::forward_sweep(normalized(C0), log, log.window(), 0.0, log.horizon(), sample_times, gate);
  Trajectory tr;
  tr.sample_times = sample_times;
  tr.infected = std::move(res.samples);
  tr.extinction_time = res.extinction;
  tr.horizon = log.horizon();
  tr.suppressed_attempts = res.suppressed;
  tr.occupation = res.occupation;
  tr.max_size = res.max_size;
  tr.background_seed = path.seed();
  tr.event_seed = log.seed();
  return tr;
}

VertexSet simulate_dual(const VertexSet& A, double t, const BackgroundPath& path, const EventLog& log,
                        std::uint64_t* suppressed) {
  check_compatible(path, log);
  if (!(t >= 0.0 && t <= log.horizon())) throw ConfigError("dual time outside [0, horizon]");
  auto gate = [&](const Edge& e, double s) { return path.is_open(e, s); };
  auto res = detail::backward_sweep(normalized(A), log, log.window(), t, gate);
  if (suppressed) *suppressed = res.suppressed;
  return res.final_set;
}

std::uint64_t replica_background_seed(std::uint64_t seed, std::uint64_t replica) {
  return derive(seed, Tag::replica, {replica, 0});
}

std::uint64_t replica_event_seed(std::uint64_t seed, std::uint64_t replica) {
  return derive(seed, Tag::replica, {replica, 1});
}

std::vector<Trajectory> coupled_runs(const std::vector<CoupledRunSpec>& runs, const KernelSpec& kernel,
                                     const ModelParams& params, const Window& window, double horizon,
                                     std::uint64_t seed, const std::vector<double>& sample_times) {
  EventLog log = EventLog::uniform(window, horizon, replica_event_seed(seed, 0), params.lambda, params.r);
  std::vector<Trajectory> out;
  out.reserve(runs.size());
  for (const auto& run : runs) {
    ModelParams p = params;
    p.q = run.q;
    BackgroundOptions opts;
    opts.init = run.init;
    BackgroundPath path(kernel, p, window, horizon, replica_background_seed(seed, 0), opts);
    out.push_back(simulate_forward(run.initial, path, log, sample_times));
  }
  return out;
}

double sequence_tail(const Sequence& s, std::int64_t R, bool reciprocal) {
  auto tail = s.tail_form();
  if (!tail) throw ConfigError("sequence has no declared tail; cannot bound the truncated mass");
  TermForm dom = *tail;
  if (reciprocal) {
    if (s.form == SeqForm::finite_support) throw DivergenceError("reciprocal of a finite-support sequence");
    dom = dom.reciprocal();
  }
  std::int64_t n0 = std::max<std::int64_t>({64, s.head_length(), R + 1});
  auto f = [&](std::int64_t k) { return reciprocal ? 1.0 / s(k) : s(k); };
  CertifiedSum cs = certified_sum(f, {dom}, R + 1, n0);
  if (!cs.finite) throw DivergenceError("tail sum beyond the cutoff is not certified finite");
  return cs.upper();
}

namespace {

struct ReplicaSummary {
  bool survived = false;
  std::uint64_t suppressed = 0;
  double occupation = 0.0;
  double max_size = 0.0;
};

}  // namespace

SurvivalEstimate survival_estimate(const VertexSet& C0, const KernelSpec& kernel, const ModelParams& params,
                                   const Window& window, double horizon, std::uint64_t replicas, std::uint64_t seed,
                                   const SurvivalOptions& opts) {
  params.validate();
  if (replicas == 0) throw ConfigError("replicas must be positive");
  VertexSet init = normalized(C0);
  std::vector<ReplicaSummary> rows(replicas);
  parallel_for(replicas, opts.workers, [&](std::size_t i) {
    BackgroundOptions bo;
    bo.init = opts.init;
    BackgroundPath path(kernel, params, window, horizon, replica_background_seed(seed, i), bo);
    EventLog log = EventLog::uniform(window, horizon, replica_event_seed(seed, i), params.lambda, params.r);
    auto gate = [&](const Edge& e, double t) { return path.is_open(e, t); };
    auto res = detail::forward_sweep(init, log, window, 0.0, horizon, {}, gate);
    rows[i] = {!res.extinction.has_value(), res.suppressed, res.occupation, static_cast<double>(res.max_size)};
  });

  SurvivalEstimate est;
  est.params = params;
  est.initial = init;
  est.horizon = horizon;
  est.replicas = replicas;
  est.confidence = opts.confidence;
  RunningStats supp, occ, mx;
  for (const auto& r : rows) {
    est.survivors += r.survived ? 1 : 0;
    supp.add(static_cast<double>(r.suppressed));
    occ.add(r.occupation);
    mx.add(r.max_size);
  }
  double n = static_cast<double>(replicas);
  est.theta = static_cast<double>(est.survivors) / n;
  est.stderr_ = std::sqrt(est.theta * (1.0 - est.theta) / n);
  est.ci = wilson_interval(est.survivors, replicas, opts.confidence);
  est.mean_occupation = occ.mean();

  // Edges longer than the cutoff are never consulted by the truncated
  // process, so their state is independent of it; an infected vertex sees
  // attempts across them at rate lambda * sum 2 P(open at s).
  TruncationLedger& L = est.ledger;
  L.window_lo = window.lo;
  L.window_hi = window.hi;
  L.cutoff = window.cutoff;
  L.mean_suppressed = supp.mean();
  if (params.lambda > 0.0 && params.q > 0.0) {
    double p_tail = sequence_tail(kernel.p_seq(), window.cutoff);
    L.long_edge_bound = params.lambda * 2.0 * params.q * p_tail * occ.mean();
    if (opts.init == BackgroundInit::all_open || opts.init == BackgroundInit::explicit_set) {
      double iv_tail = sequence_tail(kernel.v_seq(), window.cutoff, true) / params.gamma;
      L.long_edge_bound += params.lambda * 2.0 * iv_tail * mx.mean();
    }
  }
  return est;
}

ScanReport lambda_c_scan(const KernelSpec& kernel, const ModelParams& base, const std::vector<double>& lambdas,
                         const Window& window, double horizon, std::uint64_t replicas, std::uint64_t seed,
                         const ScanOptions& opts) {
  if (!std::is_sorted(lambdas.begin(), lambdas.end())) throw ConfigError("lambda grid must be sorted");
  ScanReport rep;
  rep.threshold = opts.threshold;
  auto eval = [&](double lam) {
    ModelParams p = base;
    p.lambda = lam;
    return survival_estimate(opts.initial, kernel, p, window, horizon, replicas, seed, opts.survival);
  };
  for (double lam : lambdas) rep.rows.push_back({lam, eval(lam), false});

  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const auto& a = rep.rows[i - 1].estimate;
    const auto& b = rep.rows[i].estimate;
    double pooled = std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
    if (a.theta > b.theta + 3.0 * pooled && a.theta - b.theta > 0.0)
      rep.warnings.push_back("survival decreases between lambda=" + std::to_string(rep.rows[i - 1].lambda) +
                             " and lambda=" + std::to_string(rep.rows[i].lambda) + " beyond 3 sigma");
  }

  // First grid interval where the estimate crosses the threshold.
  std::optional<std::size_t> cross;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    if (rep.rows[i - 1].estimate.theta < opts.threshold && rep.rows[i].estimate.theta >= opts.threshold) {
      cross = i;
      break;
    }
  }
  if (cross) {
    double lo = rep.rows[*cross - 1].lambda, hi = rep.rows[*cross].lambda;
    double tlo = rep.rows[*cross - 1].estimate.theta, thi = rep.rows[*cross].estimate.theta;
    for (int s = 0; s < opts.bisection_steps; ++s) {
      double mid = 0.5 * (lo + hi);
      auto e = eval(mid);
      rep.rows.push_back({mid, e, true});
      if (e.theta < opts.threshold) {
        lo = mid;
        tlo = e.theta;
      } else {
        hi = mid;
        thi = e.theta;
      }
    }
    rep.crossing = thi > tlo ? lo + (opts.threshold - tlo) * (hi - lo) / (thi - tlo) : 0.5 * (lo + hi);

    double blo = -std::numeric_limits<double>::infinity(), bhi = std::numeric_limits<double>::infinity();
    for (const auto& row : rep.rows) {
      if (row.estimate.ci.hi < opts.threshold) blo = std::max(blo, row.lambda);
      if (row.estimate.ci.lo > opts.threshold) bhi = std::min(bhi, row.lambda);
    }
    if (std::isfinite(blo) && std::isfinite(bhi) && blo < bhi) rep.crossing_bracket = Interval{blo, bhi};
  }
  return rep;
}

}  // namespace cpdlp
