#include "cpdlp/blocks.hpp"

#include <cmath>
#include <mutex>

#include "cpdlp/detail/sweep.hpp"
#include "cpdlp/error.hpp"
#include "cpdlp/parallel.hpp"
#include "cpdlp/rng.hpp"

namespace cpdlp {

BerCompResult bercomp_couple(const std::vector<std::uint8_t>& X, ConditionalOracle& oracle, double q,
                             const std::function<double(std::size_t)>& chi) {
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("target probability must lie in [0,1]");
  BerCompResult out;
  out.xprime.resize(X.size());
  out.p_cond.resize(X.size());
  for (std::size_t n = 0; n < X.size(); ++n) {
    double p = oracle.prob_one();
    out.p_cond[n] = p;
    if (p < q * (1.0 - 1e-12))
      throw CouplingViolation("conditional probability " + std::to_string(p) + " below target " +
                              std::to_string(q) + " at step " + std::to_string(n));
    double keep = q > 0.0 ? std::min(1.0, q / p) : 0.0;
    bool xp = X[n] && chi(n) < keep;
    out.xprime[n] = xp;
    oracle.observe(xp, keep);
  }
  return out;
}

double block_chi(std::uint64_t seed, const Edge& e, int n) {
  return to_unit(derive(seed, Tag::block_chi, {e.key(), static_cast<std::uint64_t>(n)}));
}

BlockTable::BlockTable(std::shared_ptr<const BackgroundPath> path, double T, std::uint64_t chi_seed)
    : path_(std::move(path)), T_(T), chi_seed_(chi_seed) {
  if (!path_) throw ConfigError("block table needs a background path");
  if (!(T > 0.0)) throw ConfigError("block length must be positive");
  window_ = path_->window();
  double nb = path_->horizon() / T;
  blocks_ = static_cast<int>(std::llround(nb));
  if (blocks_ < 1 || std::fabs(nb - blocks_) > 1e-9 * std::max(1.0, nb))
    throw ConfigError("horizon must be an integer number of blocks");
}

BlockTable BlockTable::constant(const Window& window, double T, int blocks, bool value) {
  if (!(T > 0.0) || blocks < 1) throw ConfigError("constant table needs T > 0 and blocks >= 1");
  BlockTable t;
  t.window_ = window;
  t.T_ = T;
  t.blocks_ = blocks;
  t.constant_ = value;
  return t;
}

double BlockTable::delta(std::int64_t k) const {
  if (constant_) return *constant_ ? 1.0 : 0.0;
  return delta_block_rate(path_->p_hat(k), path_->v_hat(k), T_);
}

int BlockTable::block_of(double t) const {
  int n = static_cast<int>(std::floor(t / T_));
  return std::clamp(n, 0, blocks_ - 1);
}

BlockTable::EdgeBlocks BlockTable::build(const Edge& e) const {
  EdgeBlocks eb;
  std::size_t nb = static_cast<std::size_t>(blocks_);
  if (constant_) {
    eb.w.assign(nb, *constant_);
    eb.wprime.assign(nb, *constant_);
    eb.p_cond.assign(nb, *constant_ ? 1.0 : 0.0);
    eb.delta = *constant_ ? 1.0 : 0.0;
    return eb;
  }
  const EdgeTimeline& tl = path_->timeline(e);
  std::int64_t k = e.length();
  double p = path_->p_hat(k), v = path_->v_hat(k);
  eb.delta = delta_block_rate(p, v, T_);
  eb.w = block_indicators(tl, T_, blocks_);
  double pi0 = 0.0;
  switch (path_->init()) {
    case BackgroundInit::stationary: pi0 = p; break;
    case BackgroundInit::all_open: pi0 = 1.0; break;
    case BackgroundInit::all_closed: pi0 = 0.0; break;
    case BackgroundInit::explicit_set: pi0 = tl.initial_open ? 1.0 : 0.0; break;
  }
  TwoStateOracle oracle(p, v, T_, pi0);
  auto res = bercomp_couple(eb.w, oracle, eb.delta, [&](std::size_t n) { return block_chi(chi_seed_, e, static_cast<int>(n)); });
  eb.wprime = std::move(res.xprime);
  eb.p_cond = std::move(res.p_cond);
  return eb;
}

const BlockTable::EdgeBlocks& BlockTable::edge(const Edge& e) const {
  if (!window_.covers(e)) throw WindowError("block table queried outside its window");
  {
    std::shared_lock lock(*mutex_);
    auto it = cache_.find(e);
    if (it != cache_.end()) return *it->second;
  }
  auto fresh = std::make_unique<EdgeBlocks>(build(e));
  std::unique_lock lock(*mutex_);
  auto [it, inserted] = cache_.try_emplace(e, std::move(fresh));
  return *it->second;
}

void BlockTable::materialize_all(unsigned workers) const {
  std::vector<Edge> edges;
  for (Vertex a = window_.lo - window_.cutoff; a <= window_.hi; ++a)
    for (std::int64_t k = 1; k <= window_.cutoff; ++k) {
      Edge e(a, a + k);
      if (window_.covers(e)) edges.push_back(e);
    }
  parallel_for(edges.size(), workers, [&](std::size_t i) { edge(edges[i]); });
}

std::size_t BlockTable::materialized() const {
  std::shared_lock lock(*mutex_);
  return cache_.size();
}

BlockTable build_wprime(std::shared_ptr<const BackgroundPath> path, double T, std::uint64_t chi_seed) {
  return BlockTable(std::move(path), T, chi_seed);
}

std::vector<BlockTable> build_wprime(const std::vector<std::shared_ptr<const BackgroundPath>>& bank, double T,
                                     std::uint64_t chi_seed) {
  std::vector<BlockTable> out;
  out.reserve(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) out.emplace_back(bank[i], T, derive(chi_seed, {i}));
  return out;
}

Trajectory simulate_Ctilde(const VertexSet& C0, const BlockTable& table, const EventLog& log,
                           const std::vector<double>& sample_times) {
  double horizon = table.T() * table.blocks();
  if (log.horizon() > horizon * (1.0 + 1e-12)) throw ConfigError("event horizon exceeds the block table");
  for (double s : sample_times)
    if (!(s >= 0.0 && s <= log.horizon())) throw ConfigError("sample time outside [0, horizon]");
  auto gate = [&](const Edge& e, double t) { return !table.wprime(e, table.block_of(t)); };
  auto res = detail::forward_sweep(normalized(C0), log, log.window(), 0.0, log.horizon(), sample_times, gate);
  Trajectory tr;
  tr.sample_times = sample_times;
  tr.infected = std::move(res.samples);
  tr.extinction_time = res.extinction;
  tr.horizon = log.horizon();
  tr.suppressed_attempts = res.suppressed;
  tr.occupation = res.occupation;
  tr.max_size = res.max_size;
  tr.background_seed = table.path() ? table.path()->seed() : 0;
  tr.event_seed = log.seed();
  return tr;
}

bool box_Ctilde_survives(const BlockTable& table, const EventLog& log, Vertex lo, Vertex hi, double t0, double t1) {
  Window box{lo, hi, log.window().cutoff};
  VertexSet all;
  for (Vertex x = lo; x <= hi; ++x) all.push_back(x);
  auto gate = [&](const Edge& e, double t) { return !table.wprime(e, table.block_of(t)); };
  auto res = detail::forward_sweep(all, log, box, t0, t1, {}, gate, false);
  return !res.extinction.has_value();
}

}  // namespace cpdlp
