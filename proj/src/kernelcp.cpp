#include "cpdlp/kernelcp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpdlp/background.hpp"
#include "cpdlp/detail/sweep.hpp"
#include "cpdlp/error.hpp"
#include "cpdlp/parallel.hpp"
#include "cpdlp/rng.hpp"
#include "cpdlp/stats.hpp"

namespace cpdlp {

InfectionKernel InfectionKernel::from_table(std::vector<double> table, double r) {
  for (double a : table)
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("infection rates must be finite and >= 0");
  if (!(r >= 0.0)) throw ConfigError("recovery rate must be >= 0");
  InfectionKernel k;
  k.head_ = static_cast<std::int64_t>(table.size());
  k.zero_ = std::all_of(table.begin(), table.end(), [](double a) { return a == 0.0; });
  k.f_ = [t = std::move(table)](std::int64_t d) {
    return d >= 1 && d <= static_cast<std::int64_t>(t.size()) ? t[static_cast<std::size_t>(d - 1)] : 0.0;
  };
  k.tail_ = TermForm{0.0, 0.0, 1.0};
  k.r_ = r;
  return k;
}

InfectionKernel InfectionKernel::from_function(std::function<double(std::int64_t)> f, TermForm tail, double r) {
  if (!(r >= 0.0)) throw ConfigError("recovery rate must be >= 0");
  InfectionKernel k;
  k.f_ = std::move(f);
  k.tail_ = tail;
  k.r_ = r;
  k.zero_ = tail.coeff == 0.0;
  return k;
}

CertifiedSum InfectionKernel::total() const {
  CertifiedSum s = certified_sum(f_, {tail_}, 1, std::max<std::int64_t>(64, head_));
  if (!s.finite) throw DivergenceError("infection kernel is not certified summable");
  return s;
}

double InfectionKernel::tail_sum(std::int64_t R) const {
  if (zero_ && head_ <= R) return 0.0;
  CertifiedSum s = certified_sum(f_, {tail_}, R + 1, std::max<std::int64_t>({64, head_, R + 1}));
  if (!s.finite) throw DivergenceError("infection kernel tail is not certified finite");
  return s.upper();
}

InfectionKernel kernel_from_abar(const ModelParams& params, const KernelSpec& kernel) {
  params.validate();
  TermForm dom = p_dominator(kernel).scaled(2.0 * params.lambda * params.q);
  if (params.q == 0.0 || params.lambda == 0.0) return InfectionKernel::from_table({}, params.r);
  // Tabulated heads may exceed the tail form; fold them into a table prefix.
  std::int64_t head = kernel.head_length();
  auto f = [kernel, params](std::int64_t k) { return a_bar(k, kernel, params); };
  InfectionKernel out = InfectionKernel::from_function(f, dom, params.r);
  if (head > 0) {
    std::vector<double> t;
    for (std::int64_t k = 1; k <= head; ++k) t.push_back(f(k));
    auto g = [t, f, head](std::int64_t k) { return k <= head ? t[static_cast<std::size_t>(k - 1)] : f(k); };
    out = InfectionKernel::from_function(g, dom, params.r);
  }
  return out;
}

EventLog kernel_event_log(const InfectionKernel& kernel, const Window& window, double horizon, std::uint64_t seed) {
  std::vector<double> rates(static_cast<std::size_t>(window.cutoff) + 1, 0.0);
  for (std::int64_t k = 1; k <= window.cutoff; ++k) rates[static_cast<std::size_t>(k)] = kernel.rate(k);
  return EventLog(window, horizon, seed, std::move(rates), kernel.recovery_rate());
}

Trajectory simulate_kernel_forward(const VertexSet& C0, const EventLog& log, const std::vector<double>& sample_times) {
  for (double s : sample_times)
    if (!(s >= 0.0 && s <= log.horizon())) throw ConfigError("sample time outside [0, horizon]");
  auto res = detail::forward_sweep(normalized(C0), log, log.window(), 0.0, log.horizon(), sample_times,
                                   [](const Edge&, double) { return true; });
  Trajectory tr;
  tr.sample_times = sample_times;
  tr.infected = std::move(res.samples);
  tr.extinction_time = res.extinction;
  tr.horizon = log.horizon();
  tr.suppressed_attempts = res.suppressed;
  tr.occupation = res.occupation;
  tr.max_size = res.max_size;
  tr.event_seed = log.seed();
  return tr;
}

SurvivalEstimate simulate_kernel_cp(const VertexSet& C0, const InfectionKernel& kernel, const Window& window,
                                    double horizon, std::uint64_t replicas, std::uint64_t seed,
                                    const KernelSurvivalOptions& opts) {
  if (replicas == 0) throw ConfigError("replicas must be positive");
  kernel.total();
  VertexSet init = normalized(C0);
  std::vector<double> rates(static_cast<std::size_t>(window.cutoff) + 1, 0.0);
  for (std::int64_t k = 1; k <= window.cutoff; ++k) rates[static_cast<std::size_t>(k)] = kernel.rate(k);
  struct Row {
    bool survived;
    double suppressed, occupation;
  };
  std::vector<Row> rows(replicas);
  parallel_for(replicas, opts.workers, [&](std::size_t i) {
    EventLog log(window, horizon, replica_event_seed(seed, i), rates, kernel.recovery_rate());
    auto res = detail::forward_sweep(init, log, window, 0.0, horizon, {}, [](const Edge&, double) { return true; });
    rows[i] = {!res.extinction.has_value(), static_cast<double>(res.suppressed), res.occupation};
  });
  SurvivalEstimate est;
  est.params.r = kernel.recovery_rate();
  est.params.lambda = rates.size() > 1 ? rates[1] : 0.0;
  est.initial = init;
  est.horizon = horizon;
  est.replicas = replicas;
  est.confidence = opts.confidence;
  RunningStats supp, occ;
  for (const auto& r : rows) {
    est.survivors += r.survived ? 1 : 0;
    supp.add(r.suppressed);
    occ.add(r.occupation);
  }
  double n = static_cast<double>(replicas);
  est.theta = static_cast<double>(est.survivors) / n;
  est.stderr_ = std::sqrt(est.theta * (1.0 - est.theta) / n);
  est.ci = wilson_interval(est.survivors, replicas, opts.confidence);
  est.mean_occupation = occ.mean();
  est.ledger.window_lo = window.lo;
  est.ledger.window_hi = window.hi;
  est.ledger.cutoff = window.cutoff;
  est.ledger.mean_suppressed = supp.mean();
  est.ledger.long_edge_bound = 2.0 * kernel.tail_sum(window.cutoff) * occ.mean();
  return est;
}

DominationReport edge_domination_check_rate(double lambda, double p_hat, double v_hat, double t,
                                            std::uint64_t replicas, std::uint64_t seed, std::uint64_t cap) {
  if (replicas == 0) throw ConfigError("replicas must be positive");
  DominationReport rep;
  rep.a_bar = a_bar_rate(lambda, v_hat, p_hat);
  rep.t = t;
  rep.replicas = replicas;
  rep.expected_used = lambda * occupation_mean_rate(p_hat, v_hat, t, EdgeStart::stationary);
  std::vector<std::uint64_t> counts(replicas);
  for (std::uint64_t i = 0; i < replicas; ++i) {
    Rng rng(derive(seed, Tag::replica, {i}));
    bool open0 = rng.bernoulli(p_hat);
    EdgeTimeline tl = sample_rate_chain(p_hat, v_hat, t, open0, rng);
    std::uint64_t y = 0;
    if (lambda > 0.0) {
      for (double s = rng.exponential(lambda); s <= t; s += rng.exponential(lambda))
        if (tl.state_at(s)) ++y;
    }
    counts[i] = y;
  }
  RunningStats st;
  for (auto c : counts) st.add(static_cast<double>(c));
  rep.mean_used = st.mean();
  rep.mean_stderr = st.stderr_mean();
  rep.mean_passed = rep.expected_used >= rep.a_bar * t * (1.0 - 1e-12) &&
                    rep.mean_used + 3.0 * rep.mean_stderr >= rep.a_bar * t;
  rep.passed = rep.mean_passed;
  double n = static_cast<double>(replicas);
  for (std::uint64_t m = 1; m <= cap; ++m) {
    DominationRow row;
    row.m = m;
    std::uint64_t c = static_cast<std::uint64_t>(std::count_if(counts.begin(), counts.end(), [m](auto y) { return y >= m; }));
    row.empirical = static_cast<double>(c) / n;
    row.poisson = poisson_sf(m, rep.a_bar * t);
    // Binomial sigma at the reference value keeps the check meaningful when
    // the empirical frequency is 0.
    double pr = std::max(row.empirical, row.poisson);
    row.sigma = std::sqrt(pr * (1.0 - pr) / n);
    row.passed = row.empirical >= row.poisson - 3.0 * row.sigma;
    rep.passed = rep.passed && row.passed;
    rep.rows.push_back(row);
  }
  return rep;
}

DominationReport edge_domination_check(std::int64_t k, const KernelSpec& kernel, const ModelParams& params, double t,
                                       std::uint64_t replicas, std::uint64_t seed, std::uint64_t cap) {
  params.validate();
  return edge_domination_check_rate(params.lambda, params.p_hat(kernel, k), params.v_hat(kernel, k), t, replicas,
                                    seed, cap);
}

namespace {

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

// Poisson(mu) weights for j = 0.. until the remaining mass is below tol.
template <class Step>
double uniformized_survival(double mu, Step&& step, double tol = 1e-16) {
  // step() advances the embedded chain one jump and returns P(alive).
  double lw = -mu;  // log weight of j = 0
  double acc = 0.0;
  double alive = 1.0;
  for (std::uint64_t j = 0;; ++j) {
    double w = std::exp(lw);
    acc += w * alive;
    // Poisson mass beyond j is at most w * x / (1 - x) with x = mu / (j + 2)
    double x = mu / (static_cast<double>(j) + 2.0);
    if (x < 1.0 && w * x / (1.0 - x) * alive < tol) break;
    if (alive < tol * 1e-3) break;
    if (j > 50'000'000ULL) throw ResourceError("uniformization needs too many steps", mu);
    alive = step();
    lw += std::log(mu) - std::log(static_cast<double>(j + 1));
  }
  return std::clamp(acc, 0.0, 1.0);
}

}  // namespace

double log_mean_extinction_time(std::int64_t N, double lambda, double r) {
  if (N < 1) throw ConfigError("N must be >= 1");
  if (!(r > 0.0)) throw ConfigError("r must be > 0");
  double logT = -std::log(r * static_cast<double>(N));
  double total = logT;
  for (std::int64_t k = N - 1; k >= 1; --k) {
    double kd = static_cast<double>(k);
    double beta = lambda * kd * static_cast<double>(N - k);
    double lb = beta > 0.0 ? std::log(beta) + logT : -std::numeric_limits<double>::infinity();
    logT = log_add(0.0, lb) - std::log(r * kd);
    total = log_add(total, logT);
  }
  return total;
}

double exact_extinction_tail(std::int64_t N, double lambda, double r, double h) {
  if (N < 1) throw ConfigError("N must be >= 1");
  if (h <= 0.0) return 1.0;
  std::size_t n = static_cast<std::size_t>(N);
  std::vector<double> up(n + 1), down(n + 1);
  double Lam = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    double kd = static_cast<double>(k);
    up[k] = lambda * kd * static_cast<double>(n - k);
    down[k] = r * kd;
    Lam = std::max(Lam, up[k] + down[k]);
  }
  std::vector<double> p(n + 1, 0.0), nx(n + 1);
  p[n] = 1.0;
  auto step = [&] {
    std::fill(nx.begin(), nx.end(), 0.0);
    nx[0] = p[0];
    for (std::size_t k = 1; k <= n; ++k) {
      double a = up[k] / Lam, b = down[k] / Lam;
      nx[k] += p[k] * (1.0 - a - b);
      if (k < n) nx[k + 1] += p[k] * a;
      nx[k - 1] += p[k] * b;
    }
    p.swap(nx);
    return 1.0 - p[0];
  };
  return uniformized_survival(Lam * h, step);
}

double fixed_graph_survival(int m, const std::vector<std::pair<int, int>>& edges, double lambda, double r, double T,
                            std::uint32_t initial) {
  if (m < 0 || m > 12) throw ResourceError("fixed_graph_survival supports at most 12 vertices", m);
  std::size_t S = std::size_t{1} << m;
  initial &= static_cast<std::uint32_t>(S - 1);
  if (initial == 0) return 0.0;
  if (T <= 0.0) return 1.0;
  double Lam = r * m + lambda * static_cast<double>(edges.size());
  if (Lam <= 0.0) return 1.0;
  std::vector<double> p(S, 0.0), nx(S);
  p[initial] = 1.0;
  auto step = [&] {
    std::fill(nx.begin(), nx.end(), 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      double ps = p[s];
      if (ps == 0.0) continue;
      double out = 0.0;
      for (int i = 0; i < m; ++i) {
        if (s >> i & 1U) {
          nx[s & ~(std::size_t{1} << i)] += ps * r / Lam;
          out += r;
        }
      }
      for (auto [a, b] : edges) {
        bool ia = s >> a & 1U, ib = s >> b & 1U;
        if (ia != ib) {
          nx[s | (std::size_t{1} << a) | (std::size_t{1} << b)] += ps * lambda / Lam;
          out += lambda;
        }
      }
      nx[s] += ps * (1.0 - out / Lam);
    }
    p.swap(nx);
    return 1.0 - p[0];
  };
  return uniformized_survival(Lam * T, step);
}

double sample_complete_graph_extinction(std::int64_t N, double lambda, double r, double cap, Rng& rng) {
  std::int64_t k = N;
  double t = 0.0;
  double n = static_cast<double>(N);
  while (k > 0) {
    double kd = static_cast<double>(k);
    double up = lambda * kd * (n - kd), down = r * kd;
    t += rng.exponential(up + down);
    if (t > cap) return std::numeric_limits<double>::infinity();
    if (rng.uniform() * (up + down) < up)
      ++k;
    else
      --k;
  }
  return t;
}

CompleteGraphReport complete_graph_extinction(std::int64_t N, double lambda, double r, double horizon,
                                              std::uint64_t replicas, std::uint64_t seed, double confidence,
                                              unsigned workers) {
  if (N < 1) throw ConfigError("N must be >= 1");
  CompleteGraphReport rep;
  rep.N = N;
  rep.lambda = lambda;
  rep.r = r;
  rep.horizon = horizon;
  rep.replicas = replicas;
  rep.confidence = confidence;
  rep.log_mean_time = log_mean_extinction_time(N, lambda, r);
  rep.markov_bound = horizon > 0.0 ? std::min(1.0, std::exp(rep.log_mean_time - std::log(horizon))) : 1.0;
  if (N <= kExactCompleteGraphMax) rep.exact_tail = exact_extinction_tail(N, lambda, r, horizon);
  if (replicas > 0) {
    std::vector<std::uint8_t> hit(replicas);
    parallel_for(replicas, workers, [&](std::size_t i) {
      Rng rng(derive(seed, Tag::complete_graph, {static_cast<std::uint64_t>(N), i}));
      hit[i] = sample_complete_graph_extinction(N, lambda, r, horizon, rng) > horizon;
    });
    for (auto h : hit) rep.exceed += h;
    rep.mc_estimate = static_cast<double>(rep.exceed) / static_cast<double>(replicas);
    rep.mc_upper = clopper_pearson_upper(rep.exceed, replicas, confidence);
  }
  return rep;
}

}  // namespace cpdlp
