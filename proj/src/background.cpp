#include "cpdlp/background.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cpdlp/error.hpp"

namespace cpdlp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

bool EdgeTimeline::state_at(double t) const {
  auto n = std::upper_bound(changes.begin(), changes.end(), t) - changes.begin();
  return initial_open != static_cast<bool>(n & 1);
}

bool EdgeTimeline::closed_throughout(double a, double b) const {
  if (state_at(a)) return false;
  auto it = std::upper_bound(changes.begin(), changes.end(), a);
  return it == changes.end() || *it >= b;
}

double EdgeTimeline::open_time(double t) const {
  double total = 0.0;
  bool open = initial_open;
  double last = 0.0;
  for (double c : changes) {
    if (c > t) break;
    if (open) total += c - last;
    open = !open;
    last = c;
  }
  if (open) total += t - last;
  return total;
}

const char* to_string(BackgroundInit b) {
  switch (b) {
    case BackgroundInit::stationary: return "stationary";
    case BackgroundInit::all_open: return "all_open";
    case BackgroundInit::all_closed: return "all_closed";
    case BackgroundInit::explicit_set: return "explicit";
  }
  return "?";
}

BackgroundInit background_init_from_string(const std::string& s) {
  if (s == "stationary") return BackgroundInit::stationary;
  if (s == "all_open") return BackgroundInit::all_open;
  if (s == "all_closed") return BackgroundInit::all_closed;
  if (s == "explicit") return BackgroundInit::explicit_set;
  throw ConfigError("unknown background init '" + s + "'");
}

double BackgroundPath::memory_estimate(const KernelSpec& kernel, const ModelParams& params, const Window& w,
                                       double horizon) {
  double bytes = 0.0;
  double per_length_edges = static_cast<double>(w.size());
  for (std::int64_t k = 1; k <= w.cutoff; ++k) {
    double ph = params.p_hat(kernel, k);
    double vh = params.v_hat(kernel, k);
    double flips = 2.0 * vh * ph * (1.0 - ph) * horizon + 2.0;
    bytes += (per_length_edges + static_cast<double>(k)) * (160.0 + 8.0 * flips);
  }
  return bytes;
}

BackgroundPath::BackgroundPath(KernelSpec kernel, ModelParams params, Window window, double horizon,
                               std::uint64_t seed, BackgroundOptions options)
    : kernel_(std::move(kernel)),
      params_(params),
      window_(window),
      horizon_(horizon),
      seed_(seed),
      options_(std::move(options)) {
  params_.validate();
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw ConfigError("horizon must be positive and finite");
  if (window_.hi < window_.lo || window_.cutoff < 1) throw ConfigError("window must be non-empty with cutoff >= 1");
  double need = memory_estimate(kernel_, params_, window_, horizon_);
  if (need > options_.memory_budget_bytes)
    throw ResourceError("background window needs about " + std::to_string(need) + " bytes, budget is " +
                            std::to_string(options_.memory_budget_bytes),
                        need);
  for (const Edge& e : options_.explicit_open) explicit_open_.insert(e);
  std::size_t n = static_cast<std::size_t>(window_.cutoff) + 1;
  p_.assign(n, 0.0);
  p_hat_.assign(n, 0.0);
  v_hat_.assign(n, 0.0);
  for (std::int64_t k = 1; k <= window_.cutoff; ++k) {
    p_[k] = kernel_.p(k);
    p_hat_[k] = params_.q * p_[k];
    v_hat_[k] = params_.gamma * kernel_.v(k);
  }
}

EdgeTimeline BackgroundPath::build(const Edge& e) const {
  const std::int64_t k = e.length();
  const double pk = p_[k];
  const double vh = v_hat_[k];
  const double q = params_.q;
  const double h = horizon_;
  EdgeTimeline tl;
  tl.edge = e;
  tl.horizon = h;

  Rng rng(derive(seed_, Tag::background, {e.key()}));
  double u0 = rng.uniform();
  switch (options_.init) {
    case BackgroundInit::stationary: tl.initial_open = u0 < q * pk; break;
    case BackgroundInit::all_open: tl.initial_open = true; break;
    case BackgroundInit::all_closed: tl.initial_open = false; break;
    case BackgroundInit::explicit_set: tl.initial_open = explicit_open_.count(e) > 0; break;
  }

  const double rate_a = vh * pk;
  const double rate_n = vh * (1.0 - pk);
  double next_a = rate_a > 0.0 ? rng.exponential(rate_a) : kInf;
  double mark = rng.uniform();
  auto advance_a = [&] {
    next_a += rng.exponential(rate_a);
    mark = rng.uniform();
  };

  // Always-closing refreshes live in chunks of expected size 4 so that the
  // first one after any time t is found without generating the prefix.
  const double chunk = rate_n > 0.0 ? 4.0 / rate_n : kInf;
  auto next_n_after = [&](double t) -> double {
    if (rate_n <= 0.0) return kInf;
    auto j = static_cast<std::uint64_t>(std::floor(t / chunk));
    for (;; ++j) {
      double start = static_cast<double>(j) * chunk;
      if (start > h) return kInf;
      double end = start + chunk;
      Rng c(derive(seed_, Tag::background_close, {e.key(), j}));
      double s = start + c.exponential(rate_n);
      while (s < end) {
        if (s > t) return s;
        s += c.exponential(rate_n);
      }
    }
  };

  bool open = tl.initial_open;
  double t = 0.0;
  for (;;) {
    if (!open) {
      while (next_a <= h && mark >= q) advance_a();
      if (next_a > h) break;
      t = next_a;
      open = true;
      tl.changes.push_back(t);
      advance_a();
    } else {
      double tn = next_n_after(t);
      bool closed = false;
      while (next_a <= h && next_a < tn) {
        if (mark >= q) {
          t = next_a;
          advance_a();
          closed = true;
          break;
        }
        advance_a();
      }
      if (!closed) {
        if (tn > h) break;
        t = tn;
      }
      open = false;
      tl.changes.push_back(t);
    }
  }
  return tl;
}

const EdgeTimeline& BackgroundPath::timeline(const Edge& e) const {
  if (!window_.covers(e)) throw WindowError("edge outside the background window");
  {
    std::shared_lock<std::shared_mutex> lock(*mutex_);
    auto it = cache_.find(e);
    if (it != cache_.end()) return *it->second;
  }
  auto built = std::make_unique<EdgeTimeline>(build(e));
  std::unique_lock<std::shared_mutex> lock(*mutex_);
  auto [it, inserted] = cache_.try_emplace(e, std::move(built));
  return *it->second;
}

bool BackgroundPath::is_open(const Edge& e, double t) const {
  if (t > horizon_ || t < 0.0) throw WindowError("time outside the background horizon");
  return timeline(e).state_at(t);
}

std::size_t BackgroundPath::materialized() const {
  std::shared_lock<std::shared_mutex> lock(*mutex_);
  return cache_.size();
}

BackgroundPath evolve_background(const KernelSpec& kernel, const ModelParams& params, const Window& window,
                                 double horizon, std::uint64_t seed, BackgroundOptions options) {
  return BackgroundPath(kernel, params, window, horizon, seed, std::move(options));
}

bool is_open(const BackgroundPath& path, const Edge& e, double t) { return path.is_open(e, t); }

std::vector<std::uint8_t> block_indicators(const EdgeTimeline& tl, double T, int n_blocks) {
  if (!(T > 0.0)) throw ConfigError("block length must be positive");
  if (static_cast<double>(n_blocks) * T > tl.horizon * (1.0 + 1e-12))
    throw ConfigError("horizon does not cover the requested blocks");
  std::vector<std::uint8_t> w(static_cast<std::size_t>(n_blocks));
  for (int n = 0; n < n_blocks; ++n) w[n] = tl.closed_throughout(n * T, (n + 1) * T) ? 1 : 0;
  return w;
}

std::vector<std::uint8_t> block_indicators(const BackgroundPath& path, const Edge& e, double T) {
  int n = static_cast<int>(std::floor(path.horizon() / T + 1e-9));
  return block_indicators(path.timeline(e), T, n);
}

TwoStateBlockFilter::TwoStateBlockFilter(double p, double v, double T, double initial_open_prob)
    : pi_(initial_open_prob) {
  double relax = std::exp(-v * T);
  c2o_ = p * (1.0 - relax);
  o2o_ = p + (1.0 - p) * relax;
  stay_closed_ = std::exp(-p * v * T);
}

double TwoStateBlockFilter::prob_closed_block() const { return (1.0 - pi_) * stay_closed_; }

void TwoStateBlockFilter::observe_thinned(bool xprime, double keep) {
  if (xprime) {
    pi_ = 0.0;
    return;
  }
  double end_open = pi_ * o2o_ + (1.0 - pi_) * c2o_;
  double end_closed_x0 = pi_ * (1.0 - o2o_) + (1.0 - pi_) * std::max(0.0, (1.0 - c2o_) - stay_closed_);
  double end_closed_dropped = (1.0 - pi_) * stay_closed_ * (1.0 - keep);
  double total = end_open + end_closed_x0 + end_closed_dropped;
  pi_ = total > 0.0 ? end_open / total : 0.0;
}

BlockConditionalReport block_conditionals_rate(double p, double v, double T, int depth, EdgeStart start) {
  BlockConditionalReport rep;
  rep.delta = delta_block_rate(p, v, T);
  double pi0 = start == EdgeStart::open ? 1.0 : start == EdgeStart::closed ? 0.0 : p;
  struct Node {
    TwoStateBlockFilter f;
    double prob;
  };
  std::vector<Node> level{{TwoStateBlockFilter(p, v, T, pi0), 1.0}};
  for (int n = 0; n < depth; ++n) {
    double mn = 1.0;
    std::vector<Node> next;
    for (const Node& node : level) {
      double c = node.f.prob_closed_block();
      mn = std::min(mn, c);
      ++rep.patterns;
      for (bool w : {false, true}) {
        double pw = w ? c : 1.0 - c;
        if (pw <= 0.0) continue;
        Node child = node;
        child.f.observe_w(w);
        child.prob *= pw;
        next.push_back(child);
      }
    }
    rep.min_by_depth.push_back(mn);
    rep.min_conditional = std::min(rep.min_conditional, mn);
    level = std::move(next);
  }
  rep.passed = rep.min_conditional >= rep.delta * (1.0 - 1e-12) - 1e-300;
  return rep;
}

BlockConditionalReport block_conditionals(std::int64_t k, const KernelSpec& kernel, const ModelParams& params,
                                          double T, int depth) {
  return block_conditionals_rate(params.p_hat(kernel, k), params.v_hat(kernel, k), T, depth);
}

EdgeTimeline sample_rate_chain(double p, double v, double horizon, bool initial_open, Rng& rng) {
  EdgeTimeline tl;
  tl.initial_open = initial_open;
  tl.horizon = horizon;
  bool open = initial_open;
  double t = 0.0;
  for (;;) {
    double rate = open ? v * (1.0 - p) : v * p;
    if (rate <= 0.0) break;
    t += rng.exponential(rate);
    if (t > horizon) break;
    tl.changes.push_back(t);
    open = !open;
  }
  return tl;
}

}  // namespace cpdlp
