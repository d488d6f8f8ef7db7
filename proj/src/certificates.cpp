#include "cpdlp/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "cpdlp/error.hpp"
#include "cpdlp/kernelcp.hpp"
#include "cpdlp/parallel.hpp"
#include "cpdlp/series.hpp"

namespace cpdlp {

namespace {

std::uint64_t u64(std::int64_t x) { return static_cast<std::uint64_t>(x); }

double certified_upper(const std::function<double(std::int64_t)>& f, const std::vector<TermForm>& doms,
                       std::int64_t first, const char* what) {
  CertifiedSum cs = certified_sum(f, doms, first, std::max<std::int64_t>(64, first));
  if (!cs.finite) throw DivergenceError(std::string(what) + " is not certified finite");
  return cs.upper();
}

// E|T|^2 for a branching total progeny with offspring mean mu and variance <= mu.
double progeny_second_moment(double mu) { return mu / std::pow(1.0 - mu, 3) + 1.0 / ((1.0 - mu) * (1.0 - mu)); }

std::string log10_text(double log10v) {
  double e = std::floor(log10v);
  double mant = std::pow(10.0, log10v - e);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6fe%+.0f", mant, e);
  return buf;
}

struct TailSearch {
  bool found = false;
  std::int64_t M = 0;
  double value = 0.0;
  bool monte_carlo = false;
};

// Smallest M on the doubling ladder with E[|Z| 1{|Z| > M}] < thr, by the
// analytic second-moment bound or by cluster samples plus the truncation
// correction, whichever certifies the smaller M.
TailSearch search_M(double mu, double thr, std::int64_t M_max, const std::vector<double>& sizes, double z,
                    double trunc_mass) {
  TailSearch best;
  double m2 = progeny_second_moment(mu);
  for (std::int64_t M = 1; M <= M_max; M *= 2) {
    double v = m2 / static_cast<double>(M);
    if (v < thr) {
      best = {true, M, v, false};
      break;
    }
  }
  if (!sizes.empty()) {
    double n = static_cast<double>(sizes.size());
    double corr_unit = 2.0 * trunc_mass / ((1.0 - mu) * (1.0 - mu));
    for (std::int64_t M = 1; M <= M_max && (!best.found || M < best.M); M *= 2) {
      RunningStats st;
      for (double s : sizes) st.add(s > static_cast<double>(M) ? s : 0.0);
      double ucb = st.mean() + z * st.stddev() / std::sqrt(n) + static_cast<double>(M + 1) * corr_unit;
      if (ucb < thr) {
        best = {true, M, ucb, true};
        break;
      }
    }
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// G1

VertexSet y_step(const VertexSet& Y, const G1Level& level) {
  std::unordered_map<Vertex, bool> linked;
  std::deque<Vertex> queue;
  for (Vertex y : Y) {
    if (!level.in_window(y) || linked.count(y)) continue;
    linked[y] = false;
    queue.push_back(y);
  }
  while (!queue.empty()) {
    Vertex u = queue.front();
    queue.pop_front();
    for (std::int64_t d = 1; d <= level.cutoff; ++d) {
      for (Vertex v : {u - d, u + d}) {
        if (!level.in_window(v)) continue;
        if (!level.X(Edge(u, v))) continue;
        linked[u] = true;
        auto it = linked.find(v);
        if (it == linked.end()) {
          linked[v] = true;
          queue.push_back(v);
        }
      }
    }
    if (linked.size() > (std::size_t{1} << 24)) throw ResourceError("Y closure exceeds 2^24 vertices", 1 << 24);
  }
  VertexSet out;
  for (const auto& [v, l] : linked)
    if (l || level.U(v)) out.push_back(v);
  std::sort(out.begin(), out.end());
  return out;
}

YRun simulate_Y(const VertexSet& Y0, double T, const KernelSpec& kernel, const ModelParams& params, int generations,
                std::uint64_t seed, bool with_containment_check, const YOptions& opts) {
  if (generations < 0) throw ConfigError("generations must be >= 0");
  if (!(T > 0.0)) throw ConfigError("block length must be positive");
  double horizon = T * std::max(1, generations);
  BackgroundOptions bo;
  bo.init = opts.init;
  auto path = std::make_shared<const BackgroundPath>(kernel, params, opts.window, horizon,
                                                     replica_background_seed(seed, 0), bo);
  BlockTable table(path, T, derive(seed, Tag::block_chi, {0}));
  EventLog log = EventLog::uniform(opts.window, horizon, replica_event_seed(seed, 0), params.lambda, params.r);

  YRun run;
  run.Y.push_back(normalized(Y0));
  for (int n = 0; n < generations; ++n) {
    G1Level level;
    level.cutoff = opts.window.cutoff;
    level.in_window = [&](Vertex x) { return opts.window.contains(x); };
    level.X = [&table, n](const Edge& e) { return !table.wprime(e, n); };
    double a = n * T, b = (n + 1) * T;
    level.U = [&log, a, b](Vertex x) {
      const auto& ts = log.recovery_times(x);
      auto it = std::lower_bound(ts.begin(), ts.end(), a);
      return it == ts.end() || *it >= b;
    };
    run.Y.push_back(y_step(run.Y.back(), level));
  }
  if (with_containment_check) {
    std::vector<double> samples;
    for (int n = 0; n <= generations; ++n) samples.push_back(n * T);
    Trajectory tr = simulate_Ctilde(normalized(Y0), table, log, samples);
    run.ctilde = tr.infected;
    for (int n = 0; n <= generations; ++n)
      if (!is_subset(run.ctilde[static_cast<std::size_t>(n)], run.Y[static_cast<std::size_t>(n)])) ++run.violations;
  }
  return run;
}

MeanEstimate estimate_EY1(Vertex x, double T, const KernelSpec& kernel, const ModelParams& params,
                          std::uint64_t replicas, std::uint64_t seed, const EY1Options& opts) {
  if (replicas < 2) throw ConfigError("estimate_EY1 needs at least 2 replicas");
  if (!(T > 0.0)) throw ConfigError("block length must be positive");
  auto f = [&](std::int64_t k) { return one_minus_delta(k, kernel, params, T); };
  auto base = PercolationSpec::from_function(f, one_minus_delta_dominators(kernel, params, T), kernel.head_length(), 1);
  double mu = base.mu();
  double coin = std::exp(-params.r * T);

  std::int64_t R = opts.cutoff;
  auto bias_at = [&](std::int64_t R_) {
    if (mu >= 1.0) return std::numeric_limits<double>::infinity();
    double m1 = 1.0 / (1.0 - mu);
    return 2.0 * base.tail_mass(R_) * m1 * (1.0 + m1);
  };
  if (R <= 0) {
    R = 64;
    while (R < (std::int64_t{1} << 16) && bias_at(R) > 1e-4) R *= 2;
  }
  double bias = bias_at(R);

  std::vector<double> b(static_cast<std::size_t>(R) + 1);
  for (std::int64_t k = 1; k <= R; ++k) b[static_cast<std::size_t>(k)] = f(k);
  std::vector<double> out(replicas);
  parallel_for(replicas, opts.workers, [&](std::size_t i) {
    std::uint64_t key = derive(seed, Tag::percolation, {i});
    std::uint64_t coin_key = derive(seed, Tag::coin, {i});
    G1Level level;
    level.cutoff = R;
    level.in_window = [](Vertex) { return true; };
    level.X = [&](const Edge& e) { return edge_uniform(key, e) < b[static_cast<std::size_t>(e.length())]; };
    level.U = [&](Vertex v) { return to_unit(derive(coin_key, {u64(v)})) < coin; };
    out[i] = static_cast<double>(y_step({x}, level).size());
  });
  RunningStats st;
  for (double v : out) st.add(v);
  MeanEstimate m;
  m.replicas = replicas;
  m.mean = st.mean();
  m.stderr_ = st.stderr_mean();
  double z = z_two_sided(opts.confidence);
  m.bias_bound = bias;
  m.ci = {std::max(0.0, m.mean - z * m.stderr_), m.mean + z * m.stderr_ + bias};
  return m;
}

// ---------------------------------------------------------------------------
// Immunization certificate

Certificate find_q0(double gamma, const KernelSpec& kernel, double r, double epsilon, double confidence,
                    std::uint64_t seed, const Q0Options& opts) {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(r > 0.0)) throw ConfigError("r must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must lie in (0,1)");
  if (!(opts.T_factor > 1.0) || !(opts.T_start > 0.0)) throw ConfigError("bad T ladder");

  Certificate c;
  c.kind = "immunization";
  c.confidence = confidence;
  c.inputs = {{"gamma", gamma}, {"r", r}, {"epsilon", epsilon}, {"confidence", confidence},
              {"seed", static_cast<double>(seed)}, {"q_exponent", opts.schedule.exponent}};
  const double thr = epsilon / 3.0;
  const double z = z_one_sided(confidence);
  std::int64_t M = 0;
  double mu_fixed = 0.0;
  int mc_lines = 0;
  std::optional<double> T3;

  int step = 0;
  for (double T = opts.T_start; T <= opts.T_max * (1.0 + 1e-12); T *= opts.T_factor, ++step) {
    std::map<std::string, double> at{{"T", T}};
    double e = std::exp(-r * T);
    c.ladder.push_back({"exp(-rT)", e, thr, e < thr, 1.0, at, ""});
    if (e >= thr) continue;

    if (M == 0) {
      auto f = [&](std::int64_t k) { return b_of_T(k, kernel, gamma, T, opts.schedule); };
      auto spec = PercolationSpec::from_function(f, b_of_T_dominators(kernel, gamma, T, opts.schedule),
                                                 kernel.head_length(), 1);
      double mu;
      try {
        mu = spec.mu();
      } catch (const DivergenceError&) {
        mu = std::numeric_limits<double>::infinity();
      }
      c.ladder.push_back({"mu(T)", mu, 1.0, mu < 1.0, 1.0, at, "2 sum_k b_k(T)"});
      if (!(mu < 1.0)) continue;

      std::int64_t R = 64;
      double target = 1e-4 * epsilon;
      while (R < (std::int64_t{1} << 16) && 2.0 * spec.tail_mass(R) / ((1.0 - mu) * (1.0 - mu)) > target) R *= 2;
      auto cut = spec.with_cutoff(R);
      std::vector<double> sizes(opts.tail_replicas);
      parallel_for(sizes.size(), opts.workers, [&](std::size_t i) {
        auto cl = sample_cluster(0, cut, derive(seed, Tag::ladder, {u64(step), i}), 1u << 20);
        sizes[i] = static_cast<double>(cl.size());
      });
      TailSearch ts = search_M(mu, thr, opts.M_max, sizes, z, spec.tail_mass(R));
      std::map<std::string, double> atM = at;
      atM["M"] = static_cast<double>(ts.M);
      atM["cutoff"] = static_cast<double>(R);
      if (ts.monte_carlo) ++mc_lines;
      c.ladder.push_back({"tail(M)", ts.found ? ts.value : 1.0, thr, ts.found, ts.monte_carlo ? confidence : 1.0,
                          atM, ts.monte_carlo ? "cluster samples, upper confidence bound" : "second-moment bound"});
      if (!ts.found) continue;
      M = ts.M;
      mu_fixed = mu;
    }

    ModelParams p;
    p.gamma = gamma;
    p.r = r;
    p.q = opts.schedule.q(T);
    auto g = [&](std::int64_t k) { return one_minus_delta(k, kernel, p, T); };
    double s = 2.0 * certified_upper(g, one_minus_delta_dominators(kernel, p, T), 1, "sum of 1 - delta_k");
    std::map<std::string, double> atM = at;
    atM["M"] = static_cast<double>(M);
    atM["q"] = p.q;
    double lim = epsilon / (3.0 * static_cast<double>(M));
    c.ladder.push_back({"2 sum(1-delta)", s, lim, s < lim, 1.0, atM, ""});
    if (s < lim) {
      T3 = T;
      break;
    }
  }
  (void)mu_fixed;

  double miss = mc_lines * (1.0 - confidence);
  c.confidence_statement = "every Monte Carlo ladder line holds at one-sided confidence " + std::to_string(confidence) +
                           "; jointly with probability at least " + std::to_string(std::max(0.0, 1.0 - miss));
  if (!T3) {
    c.certified = false;
    c.verdict = "no certificate found";
    for (auto it = c.ladder.rbegin(); it != c.ladder.rend(); ++it)
      if (!it->passed) {
        c.failing = it->param;
        break;
      }
    return c;
  }
  c.certified = true;
  c.verdict = "certified";
  double q0 = opts.schedule.q(*T3);
  c.output = {{"q0", q0}, {"T", *T3}, {"M", static_cast<double>(M)}};

  ModelParams p;
  p.gamma = gamma;
  p.r = r;
  p.q = q0;
  EY1Options eo;
  eo.confidence = confidence;
  eo.workers = opts.workers;
  MeanEstimate ey = estimate_EY1(0, *T3, kernel, p, opts.ey1_replicas, derive(seed, Tag::coin, {1}), eo);
  c.corroboration.mean = ey.mean;
  c.corroboration.stderr_ = ey.stderr_;
  c.corroboration.ci = ey.ci;
  c.corroboration.replicas = ey.replicas;
  c.corroboration.passed = ey.mean + 3.0 * ey.stderr_ + ey.bias_bound < 1.0;
  return c;
}

// ---------------------------------------------------------------------------
// Boxes

std::optional<std::int64_t> BlockPartition::box_of(Vertex x) const {
  if (x <= anchor(k_lo - 1) || x > anchor(k_hi)) return std::nullopt;
  auto first = anchors.begin() + 1;
  auto it = std::lower_bound(first, anchors.end(), x);
  return k_lo + static_cast<std::int64_t>(it - first);
}

bool is_cut(const BlockTable& table, const BoxGeometry& g, int n, Vertex m) {
  std::int64_t L = 2 * g.K0;
  for (std::int64_t d = 1; d <= L; ++d)
    for (Vertex x = m - d + 1; x <= m; ++x)
      if (!table.wprime(Edge(x, x + d), n)) return false;
  return true;
}

BlockPartition build_partition(const BlockTable& table, const BoxGeometry& g, int n, std::int64_t k_lo,
                               std::int64_t k_hi) {
  if (g.K0 < 1 || g.r0 < 1) throw ConfigError("K0 and r0 must be >= 1");
  if (k_hi < k_lo) throw ConfigError("empty box range");
  if (table.window().cutoff < 2 * g.K0) throw ConfigError("table cutoff must be >= 2 K0");
  BlockPartition p;
  p.geom = g;
  p.n = n;
  p.k_lo = k_lo;
  p.k_hi = k_hi;
  for (std::int64_t k = k_lo - 1; k <= k_hi; ++k) {
    VInterval mid = g.mid(k);
    std::optional<Vertex> c;
    for (Vertex m = mid.hi; m >= mid.lo; --m)
      if (is_cut(table, g, n, m)) {
        c = m;
        break;
      }
    p.anchors.push_back(c ? *c : mid.hi);
    p.X.push_back(!c);
  }
  return p;
}

double a_pair_truncated(const BlockTable& table, const BoxGeometry& g, std::int64_t k, std::int64_t l) {
  VInterval A = g.Dmax(k), B = g.Dmax(l);
  double s = 0.0;
  for (Vertex x = A.lo; x <= A.hi; ++x)
    for (Vertex y = B.lo; y <= B.hi; ++y) {
      std::int64_t d = std::abs(x - y);
      if (d > 2 * g.K0 && d <= table.window().cutoff) s += 1.0 - table.delta(d);
    }
  return s;
}

XWUTable build_XWU(const BlockPartition& part, const BlockTable& table, const EventLog& log, const ModelParams& params,
                   const XWUOptions& opts) {
  const BoxGeometry& g = part.geom;
  const int n = part.n;
  const std::int64_t R = log.window().cutoff;
  if (table.window().cutoff < R) throw ConfigError("block table cutoff below the event cutoff");
  const double T = table.T();
  XWUTable t;
  t.n = n;
  t.k_lo = part.k_lo;
  t.k_hi = part.k_hi;

  std::int64_t N = 2 * (g.K0 + g.r0);
  if (N <= kExactCompleteGraphMax) {
    t.eps3 = exact_extinction_tail(N, params.lambda, params.r, T);
  } else {
    t.eps3 = std::min(1.0, std::exp(log_mean_extinction_time(N, params.lambda, params.r)) / T);
  }

  for (std::int64_t k = part.k_lo; k <= part.k_hi; ++k) {
    VInterval D = part.D(k);
    VInterval Dl{std::max(D.lo, log.window().lo), std::min(D.hi, log.window().hi)};
    bool U = Dl.size() > 0 && box_Ctilde_survives(table, log, Dl.lo, Dl.hi, n * T, (n + 1) * T);

    double pU = 1.0;
    if (Dl.size() > 0) {
      if (static_cast<std::size_t>(Dl.size()) > opts.max_box)
        throw ResourceError("exact p^U needs a box of at most 12 vertices", static_cast<double>(Dl.size()));
      int m = static_cast<int>(Dl.size());
      std::vector<std::pair<int, int>> fixed;
      std::vector<std::pair<std::pair<int, int>, double>> free;
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) {
          std::int64_t d = j - i;
          if (d > R) continue;
          Edge e(Dl.lo + i, Dl.lo + j);
          if (d <= 2 * g.K0) {
            if (!table.wprime(e, n)) fixed.push_back({i, j});
          } else {
            free.push_back({{i, j}, table.delta(d)});
          }
        }
      if (free.size() > opts.max_long_edges)
        throw ResourceError("exact p^U enumeration exceeds the long-edge limit", static_cast<double>(free.size()));
      double all = static_cast<double>((std::uint32_t{1} << m) - 1);
      double survive = 0.0;
      for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << free.size()); ++mask) {
        double w = 1.0;
        auto edges = fixed;
        for (std::size_t i = 0; i < free.size(); ++i) {
          if (mask >> i & 1U) {
            w *= 1.0 - free[i].second;
            edges.push_back(free[i].first);
          } else {
            w *= free[i].second;
          }
        }
        if (w == 0.0) continue;
        survive += w * fixed_graph_survival(m, edges, params.lambda, params.r, T, static_cast<std::uint32_t>(all));
      }
      pU = std::clamp(1.0 - survive, 0.0, 1.0);
    }
    if (pU < (1.0 - t.eps3) * (1.0 - 1e-9) - 1e-12)
      throw CouplingViolation("p^U below 1 - eps3");
    double sU = t.eps3 >= 1.0 ? 0.0 : std::min(1.0, (1.0 - t.eps3) / pU);
    double chi = to_unit(derive(opts.chi_seed, Tag::u_chi, {u64(k), u64(n)}));
    bool Up = !(!U && chi <= sU);
    t.U.push_back(U);
    t.Uprime.push_back(Up);
    t.pU.push_back(pU);
    t.sU.push_back(sU);
  }

  std::int64_t reach = (R + g.period() - 1) / g.period() + 2;
  for (std::int64_t k = part.k_lo; k <= part.k_hi; ++k) {
    for (std::int64_t l = k + 1; l <= std::min(part.k_hi, k + reach); ++l) {
      VInterval A = part.D(k), B = part.D(l);
      WEntry w;
      w.k = k;
      w.l = l;
      bool any = false;
      for (Vertex x = A.lo; x <= A.hi; ++x)
        for (Vertex y = B.lo; y <= B.hi; ++y) {
          std::int64_t d = std::abs(y - x);
          if (d <= 2 * g.K0 || d > R) continue;
          any = true;
          w.pW *= table.delta(d);
          if (!table.wprime(Edge(x, y), n)) w.W = true;
        }
      if (!any) continue;
      w.a = a_pair_truncated(table, g, k, l);
      double chi = to_unit(derive(opts.chi_seed, Tag::w_chi, {u64(k), u64(l), u64(n)}));
      if (w.a >= 1.0) {
        w.sW = 0.0;
        w.Wprime = true;
      } else {
        if (w.pW < (1.0 - w.a) * (1.0 - 1e-12)) throw CouplingViolation("p^W below 1 - a");
        w.sW = std::min(1.0, (1.0 - w.a) / w.pW);
        w.Wprime = !(!w.W && chi <= w.sW);
      }
      t.W.push_back(w);
    }
  }
  return t;
}

std::pair<BlockPartition, XWUTable> build_partition_and_XWU(const BlockTable& table, const EventLog& log,
                                                            const BoxGeometry& g, int n, std::int64_t k_lo,
                                                            std::int64_t k_hi, const ModelParams& params,
                                                            const XWUOptions& opts) {
  BlockPartition p = build_partition(table, g, n, k_lo, k_hi);
  XWUTable t = build_XWU(p, table, log, params, opts);
  return {std::move(p), std::move(t)};
}

VertexSet z_step(const VertexSet& Z, const G2Level& level) {
  std::map<std::int64_t, std::vector<std::int64_t>> wadj;
  for (auto [k, l] : level.W) {
    wadj[k].push_back(l);
    wadj[l].push_back(k);
  }
  auto in = [&](std::int64_t k) { return k >= level.k_lo && k <= level.k_hi; };
  std::set<std::int64_t> seen;
  std::deque<std::int64_t> queue;
  for (auto k : Z)
    if (in(k) && seen.insert(k).second) queue.push_back(k);
  auto visit = [&](std::int64_t k) {
    if (in(k) && seen.insert(k).second) queue.push_back(k);
  };
  while (!queue.empty()) {
    auto k = queue.front();
    queue.pop_front();
    if (level.X(k)) visit(k + 1);
    if (level.X(k - 1)) visit(k - 1);
    if (auto it = wadj.find(k); it != wadj.end())
      for (auto l : it->second) visit(l);
  }
  std::set<std::int64_t> out;
  for (auto j : seen) {
    bool fan = level.U(j) || level.X(j) || level.X(j - 1) || wadj.count(j);
    if (!fan) continue;
    for (auto i : {j - 1, j, j + 1})
      if (in(i)) out.insert(i);
  }
  return VertexSet(out.begin(), out.end());
}

ZRun simulate_Zprime(const VertexSet& Z0, const std::vector<BlockPartition>& parts,
                     const std::vector<XWUTable>& tables, int generations, const std::vector<VertexSet>* ctilde) {
  if (static_cast<int>(parts.size()) < generations || static_cast<int>(tables.size()) < generations)
    throw ConfigError("fewer block tables than generations");
  ZRun run;
  run.Z.push_back(normalized(Z0));
  run.Zprime.push_back(normalized(Z0));
  for (int n = 0; n < generations; ++n) {
    const auto& P = parts[static_cast<std::size_t>(n)];
    const auto& X = tables[static_cast<std::size_t>(n)];
    auto xf = [&P](std::int64_t k) { return k >= P.k_lo - 1 && k <= P.k_hi && P.x(k); };
    G2Level lv, lvp;
    lv.k_lo = lvp.k_lo = P.k_lo;
    lv.k_hi = lvp.k_hi = P.k_hi;
    lv.X = lvp.X = xf;
    lv.U = [&X](std::int64_t k) { return X.u(k); };
    lvp.U = [&X](std::int64_t k) { return X.uprime(k); };
    for (const auto& w : X.W) {
      if (w.W) lv.W.push_back({w.k, w.l});
      if (w.Wprime) lvp.W.push_back({w.k, w.l});
    }
    run.Z.push_back(z_step(run.Z.back(), lv));
    run.Zprime.push_back(z_step(run.Zprime.back(), lvp));
  }
  for (std::size_t n = 0; n < run.Z.size(); ++n)
    if (!is_subset(run.Z[n], run.Zprime[n])) ++run.subset_violations;
  if (ctilde) {
    for (int n = 0; n < generations && n < static_cast<int>(ctilde->size()); ++n) {
      const auto& P = parts[static_cast<std::size_t>(n)];
      const auto& Zn = run.Z[static_cast<std::size_t>(n)];
      bool ok = true;
      for (Vertex x : (*ctilde)[static_cast<std::size_t>(n)]) {
        auto k = P.box_of(x);
        if (!k || !std::binary_search(Zn.begin(), Zn.end(), *k)) ok = false;
      }
      if (!ok) ++run.containment_violations;
    }
  }
  return run;
}

ZAuditReport audit_Z(const KernelSpec& kernel, const ModelParams& params, const VertexSet& C0, std::uint64_t replicas,
                     std::uint64_t seed, const ZAuditOptions& opts) {
  BoxGeometry g{opts.K0, opts.r0};
  const std::int64_t k_lo = -opts.boxes, k_hi = opts.boxes;
  const int G = opts.generations;
  if (G < 1) throw ConfigError("audit needs at least one generation");
  if (opts.cutoff < 2 * g.K0) throw ConfigError("cutoff must be >= 2 K0");
  Window logw{g.mid(k_lo - 1).lo, g.mid(k_hi).hi, opts.cutoff};
  Window bgw{logw.lo - 2 * g.K0, logw.hi + 2 * g.K0, opts.cutoff};
  for (Vertex x : C0)
    if (!logw.contains(x)) throw WindowError("initial set outside the audit window");
  double horizon = G * opts.T;

  struct Slot {
    ZAuditReport r;
  };
  std::vector<Slot> slots(replicas);
  parallel_for(replicas, opts.workers, [&](std::size_t i) {
    ZAuditReport& rep = slots[i].r;
    auto path = std::make_shared<const BackgroundPath>(kernel, params, bgw, horizon, replica_background_seed(seed, i));
    BlockTable table(path, opts.T, derive(seed, Tag::block_chi, {i}));
    EventLog log = EventLog::uniform(logw, horizon, replica_event_seed(seed, i), params.lambda, params.r);
    std::vector<double> samples;
    for (int n = 0; n <= G; ++n) samples.push_back(n * opts.T);
    Trajectory ct = simulate_Ctilde(normalized(C0), table, log, samples);
    Trajectory cp = simulate_forward(normalized(C0), *path, log, samples);
    for (std::size_t s = 0; s < samples.size(); ++s)
      if (!is_subset(cp.infected[s], ct.infected[s])) ++rep.ctilde_violations;

    XWUOptions xo;
    xo.chi_seed = derive(seed, Tag::u_chi, {i});
    std::vector<BlockPartition> parts;
    std::vector<XWUTable> tabs;
    RunningStats up, iso;
    for (int n = 0; n < G; ++n) {
      auto [P, X] = build_partition_and_XWU(table, log, g, n, k_lo, k_hi, params, xo);
      for (std::int64_t k = k_lo; k <= k_hi; ++k) {
        VInterval D = P.D(k), lo = g.Dmin(k), hi = g.Dmax(k);
        bool ok = D.size() >= 2 * g.K0 && D.size() <= 2 * g.K0 + 2 * g.r0 && D.lo <= lo.lo && D.hi >= lo.hi &&
                  D.lo >= hi.lo && D.hi <= hi.hi;
        if (!ok) ++rep.partition_violations;
        if (X.u(k) && !X.uprime(k)) ++rep.u_violations;
        up.add(X.uprime(k) ? 1.0 : 0.0);
        iso.add(P.isolated(k) ? 1.0 : 0.0);
      }
      for (const auto& w : X.W)
        if (w.W && !w.Wprime) ++rep.w_violations;
      rep.eps3 = X.eps3;
      parts.push_back(std::move(P));
      tabs.push_back(std::move(X));
    }
    VertexSet Z0;
    for (Vertex x : C0)
      if (auto k = parts[0].box_of(x)) Z0.push_back(*k);
    ZRun zr = simulate_Zprime(normalized(Z0), parts, tabs, G, &ct.infected);
    rep.z_violations = zr.subset_violations;
    rep.containment_violations = zr.containment_violations;
    rep.uprime = up;
    rep.isolated = iso;
    rep.uprime_means.push_back(up.mean());
  });

  ZAuditReport out;
  out.replicas = replicas;
  for (auto& s : slots) {
    out.u_violations += s.r.u_violations;
    out.w_violations += s.r.w_violations;
    out.z_violations += s.r.z_violations;
    out.containment_violations += s.r.containment_violations;
    out.ctilde_violations += s.r.ctilde_violations;
    out.partition_violations += s.r.partition_violations;
    out.uprime.merge(s.r.uprime);
    out.isolated.merge(s.r.isolated);
    out.uprime_means.insert(out.uprime_means.end(), s.r.uprime_means.begin(), s.r.uprime_means.end());
    out.eps3 = s.r.eps3;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Slow-speed certificate

double delta_slow(std::int64_t y, const KernelSpec& kernel, double q) {
  return delta_block_rate(q * kernel.p(y), kernel.v(y), 1.0);
}

namespace {

double one_minus_delta_slow(std::int64_t y, const KernelSpec& kernel, double q) {
  return one_minus_delta_rate(q * kernel.p(y), kernel.v(y), 1.0);
}

std::vector<TermForm> slow_dominators(const KernelSpec& kernel, double q) {
  ModelParams p;
  p.gamma = 1.0;
  p.q = q;
  return one_minus_delta_dominators(kernel, p, 1.0);
}

}  // namespace

EpsBounds eps_bounds(std::int64_t K0, std::int64_t r0, const KernelSpec& kernel, double q, std::uint64_t seed,
                     double confidence, const EpsOptions& opts) {
  if (K0 < 1 || r0 < 1) throw ConfigError("K0 and r0 must be >= 1");
  EpsBounds eb;
  eb.K0 = K0;
  eb.r0 = r0;
  eb.confidence = confidence;
  const std::int64_t S = 2 * (K0 + r0), L = 2 * K0 + r0;
  auto f = [&](std::int64_t d) { return one_minus_delta_slow(d, kernel, q); };
  auto doms = slow_dominators(kernel, q);

  eb.eps2 = 8.0 * static_cast<double>(K0 + r0) * certified_upper(f, doms, 2 * K0 + 1, "sum of 1 - delta");

  for (std::int64_t j = 1; j <= opts.J; ++j) {
    CompensatedSum s;
    for (std::int64_t d = j * L - S + 1; d <= j * L + S - 1; ++d) {
      if (std::abs(d) <= 2 * K0) continue;
      s.add(static_cast<double>(S - std::abs(d - j * L)) * f(std::abs(d)));
    }
    eb.a.push_back(s.value());
  }
  eb.a_tail = 4.0 * static_cast<double>(S) * certified_upper(f, doms, (opts.J + 1) * L - S + 1, "tail of a_j");
  CompensatedSum at;
  for (double v : eb.a) at.add(v);
  eb.a_total = 2.0 * (at.value() + eb.a_tail);

  auto spec0 = PercolationSpec::from_function(f, doms, kernel.head_length(), 1);
  double target = opts.eps1_correction_target;
  std::int64_t R1 = 64;
  auto correction = [&](std::int64_t R) {
    return spec0.tail_first_moment(R) + static_cast<double>(r0 - 1) * spec0.tail_mass(R);
  };
  while (R1 < (std::int64_t{1} << 20) && correction(R1) > target) R1 *= 2;
  eb.eps1_cutoff = R1;
  eb.eps1_correction = correction(R1);
  eb.eps1_replicas = opts.eps1_replicas;
  if (opts.eps1_replicas == 0) return eb;
  auto spec = spec0.with_cutoff(R1);
  std::vector<std::uint8_t> hit(opts.eps1_replicas);
  parallel_for(hit.size(), opts.workers, [&](std::size_t i) {
    Rng rng(derive(seed, Tag::ladder, {u64(r0), i}));
    auto cut = sample_cut_indicators(spec, r0, rng);
    hit[i] = std::none_of(cut.begin(), cut.end(), [](std::uint8_t c) { return c != 0; });
  });
  eb.eps1_hits = static_cast<std::uint64_t>(std::count(hit.begin(), hit.end(), 1));
  eb.eps1_mc = clopper_pearson_upper(eb.eps1_hits, eb.eps1_replicas, confidence);
  eb.eps1 = std::min(1.0, eb.eps1_mc + eb.eps1_correction);
  return eb;
}

Eps3Bound eps3_bound(std::int64_t K0, std::int64_t r0, double lambda, double r, double log_gamma) {
  Eps3Bound e;
  e.N = 2 * (K0 + r0);
  e.log_mean_time = log_mean_extinction_time(e.N, lambda, r);
  e.log_gamma = log_gamma;
  e.value = std::min(1.0, std::exp(e.log_mean_time + log_gamma));
  if (e.N <= kExactCompleteGraphMax) e.exact = exact_extinction_tail(e.N, lambda, r, std::exp(-log_gamma));
  return e;
}

std::size_t sample_Zprime1(const EpsBounds& eb, const KernelSpec& kernel, double q, double eps3, Rng& rng) {
  const std::int64_t J = static_cast<std::int64_t>(eb.a.size());
  auto shortspec = PercolationSpec::from_table(
      [&] {
        std::vector<double> b;
        for (std::int64_t d = 1; d <= 2 * eb.K0; ++d) b.push_back(one_minus_delta_slow(d, kernel, q));
        return b;
      }(),
      2 * eb.K0);
  std::map<std::int64_t, bool> X, U;
  std::map<std::pair<std::int64_t, std::int64_t>, bool> W;
  auto x = [&](std::int64_t k) {
    auto it = X.find(k);
    if (it != X.end()) return it->second;
    auto cut = sample_cut_indicators(shortspec, eb.r0, rng);
    bool v = std::none_of(cut.begin(), cut.end(), [](std::uint8_t c) { return c != 0; });
    X[k] = v;
    return v;
  };
  auto w = [&](std::int64_t k, std::int64_t l) {
    auto key = std::minmax(k, l);
    auto it = W.find(key);
    if (it != W.end()) return it->second;
    bool v = rng.bernoulli(std::min(1.0, eb.a[static_cast<std::size_t>(std::abs(k - l) - 1)]));
    W[key] = v;
    return v;
  };
  std::set<std::int64_t> seen{0};
  std::deque<std::int64_t> queue{0};
  std::vector<std::int64_t> order;
  std::map<std::int64_t, bool> wany;
  while (!queue.empty()) {
    auto k = queue.front();
    queue.pop_front();
    order.push_back(k);
    auto visit = [&](std::int64_t l) {
      if (seen.insert(l).second) queue.push_back(l);
    };
    if (x(k)) visit(k + 1);
    if (x(k - 1)) visit(k - 1);
    bool any = false;
    for (std::int64_t j = 1; j <= J; ++j)
      for (auto l : {k - j, k + j})
        if (w(k, l)) {
          any = true;
          visit(l);
        }
    wany[k] = any;
  }
  std::set<std::int64_t> out;
  for (auto j : order) {
    bool u = rng.bernoulli(eps3);
    if (u || x(j) || x(j - 1) || wany[j])
      for (auto i : {j - 1, j, j + 1}) out.insert(i);
  }
  return out.size();
}

Certificate find_gamma_star(double lambda, double q, const KernelSpec& kernel, double epsilon, double confidence,
                            std::uint64_t seed, const GammaStarOptions& opts) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("q must lie in [0,1]");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must lie in (0,1)");
  if (!(opts.r > 0.0)) throw ConfigError("r must be positive");

  Certificate c;
  c.kind = "slow-speed";
  c.confidence = confidence;
  c.inputs = {{"lambda", lambda}, {"q", q}, {"r", opts.r}, {"epsilon", epsilon}, {"confidence", confidence},
              {"seed", static_cast<double>(seed)}};
  const double thr = epsilon / 3.0;
  const double z = z_one_sided(confidence);
  int mc_lines = 0;
  std::optional<EpsBounds> found;
  std::int64_t M = 0;
  double mu_found = 0.0;

  for (std::int64_t r0 = opts.r0_start; r0 <= opts.r0_max; r0 *= 2) {
    std::int64_t K0 = r0;
    std::map<std::string, double> at{{"r0", static_cast<double>(r0)}, {"K0", static_cast<double>(K0)}};
    EpsOptions eo = opts.eps;
    eo.workers = opts.workers;
    // The Monte Carlo part of eps1 is skipped when the analytic part already fails.
    EpsBounds eb;
    {
      EpsOptions cheap = eo;
      cheap.eps1_replicas = 0;
      eb = eps_bounds(K0, r0, kernel, q, seed, confidence, cheap);
    }
    c.ladder.push_back({"eps2", eb.eps2, 1.0, eb.eps2 < 1.0, 1.0, at, "8(K0+r0) sum_{y>2K0}(1-delta_y)"});
    c.ladder.push_back({"sum_l a_kl", eb.a_total, thr, eb.a_total < thr, 1.0, at, ""});
    if (!(eb.a_total < thr)) continue;
    eb = eps_bounds(K0, r0, kernel, q, seed, confidence, eo);
    ++mc_lines;
    c.ladder.push_back({"eps1", eb.eps1, thr / 2.0, eb.eps1 < thr / 2.0, confidence, at,
                        "Clopper-Pearson bound plus cutoff correction"});
    if (!(eb.eps1 < thr / 2.0)) continue;

    std::vector<double> b = eb.a;
    b[0] = std::min(1.0, eb.eps1 + eb.a[0]);
    CompensatedSum bs;
    for (double v : b) bs.add(v);
    double mu = 2.0 * (bs.value() + eb.a_tail);
    c.ladder.push_back({"mu", mu, 1.0, mu < 1.0, confidence, at, "box percolation mean degree"});
    if (!(mu < 1.0)) continue;

    auto spec = PercolationSpec::from_table(b, static_cast<std::int64_t>(b.size()));
    std::vector<double> sizes(opts.tail_replicas);
    parallel_for(sizes.size(), opts.workers, [&](std::size_t i) {
      sizes[i] = static_cast<double>(sample_cluster(0, spec, derive(seed, Tag::ladder, {u64(r0), 1, i})).size());
    });
    TailSearch ts = search_M(mu, thr, opts.M_max, sizes, z, eb.a_tail);
    if (ts.monte_carlo) ++mc_lines;
    auto atM = at;
    atM["M"] = static_cast<double>(ts.M);
    c.ladder.push_back({"tail(M)", ts.found ? ts.value : 1.0, thr, ts.found, ts.monte_carlo ? confidence : 1.0, atM,
                        ts.monte_carlo ? "cluster samples, upper confidence bound" : "second-moment bound"});
    if (!ts.found) continue;
    double lhs = static_cast<double>(ts.M) * (2.0 * eb.eps1 + eb.a_total);
    c.ladder.push_back({"M(2eps1+sum a)", lhs, thr, lhs < thr, confidence, atM, ""});
    if (!(lhs < thr)) continue;
    found = eb;
    M = ts.M;
    mu_found = mu;
    break;
  }

  double miss = mc_lines * (1.0 - confidence);
  c.confidence_statement = "every Monte Carlo ladder line holds at one-sided confidence " + std::to_string(confidence) +
                           "; jointly with probability at least " + std::to_string(std::max(0.0, 1.0 - miss));
  if (!found) {
    c.certified = false;
    c.verdict = "no certificate found";
    for (auto it = c.ladder.rbegin(); it != c.ladder.rend(); ++it)
      if (!it->passed) {
        c.failing = it->param;
        break;
      }
    return c;
  }

  const auto& eb = *found;
  double log_gamma = std::log(thr * (1.0 - 1e-9)) - log_mean_extinction_time(2 * (eb.K0 + eb.r0), lambda, opts.r);
  Eps3Bound e3 = eps3_bound(eb.K0, eb.r0, lambda, opts.r, log_gamma);
  std::map<std::string, double> at{{"r0", static_cast<double>(eb.r0)}, {"N", static_cast<double>(e3.N)}};
  c.ladder.push_back({"eps3", e3.value, thr, e3.value < thr, 1.0, at, "mean extinction time and Markov"});
  c.certified = e3.value < thr;
  c.verdict = c.certified ? "certified" : "no certificate found";
  if (!c.certified) {
    c.failing = "eps3";
    return c;
  }
  double log10g = log_gamma / std::log(10.0);
  double gstar = std::exp(log_gamma);
  c.output = {{"log10_gamma_star", log10g}, {"r0", static_cast<double>(eb.r0)}, {"K0", static_cast<double>(eb.K0)},
              {"M", static_cast<double>(M)}, {"N", static_cast<double>(e3.N)}, {"eps1", eb.eps1},
              {"eps2", eb.eps2}, {"eps3", e3.value}};
  if (gstar > 0.0 && std::isnormal(gstar))
    c.output["gamma_star"] = gstar;
  else
    c.output_text["gamma_star"] = log10_text(log10g);

  std::vector<double> zs(opts.z_replicas);
  parallel_for(zs.size(), opts.workers, [&](std::size_t i) {
    Rng rng(derive(seed, Tag::coin, {2, i}));
    zs[i] = static_cast<double>(sample_Zprime1(eb, kernel, q, e3.value, rng));
  });
  RunningStats st;
  for (double v : zs) st.add(v);
  double closure_mu = 2.0 * (eb.eps1 + eb.a_total / 2.0);
  double bias = closure_mu < 1.0 ? 3.0 * 2.0 * eb.a_tail / ((1.0 - closure_mu) * (1.0 - closure_mu))
                                 : std::numeric_limits<double>::infinity();
  (void)mu_found;
  double zc = z_two_sided(confidence);
  c.corroboration.mean = st.mean();
  c.corroboration.stderr_ = st.stderr_mean();
  c.corroboration.ci = {std::max(0.0, st.mean() - zc * st.stderr_mean()), st.mean() + zc * st.stderr_mean() + bias};
  c.corroboration.replicas = zs.size();
  c.corroboration.passed = st.mean() + 3.0 * st.stderr_mean() + bias < 1.0;
  return c;
}

}  // namespace cpdlp
