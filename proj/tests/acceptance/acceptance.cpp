// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// only when a blocking criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cpdlp/blocks.hpp"
#include "cpdlp/certificates.hpp"
#include "cpdlp/engine.hpp"
#include "cpdlp/kernelcp.hpp"
#include "cpdlp/model.hpp"
#include "cpdlp/percolation.hpp"
#include "cpdlp/stats.hpp"
#include "oracles/oracles.hpp"

using namespace cpdlp;

namespace {

// Pinned tolerances.
constexpr double kSigmas = 3.0;
constexpr double kFormulaRelTol = 1e-12;
constexpr double kChi2MinP = 0.01;

struct Outcome {
  bool pass = false;
  std::string detail;
};

ModelParams params(double lambda, double q, double gamma = 1.0) {
  ModelParams m;
  m.lambda = lambda;
  m.q = q;
  m.gamma = gamma;
  return m;
}

bool meets(const VertexSet& a, const VertexSet& b) {
  for (Vertex x : a)
    if (std::binary_search(b.begin(), b.end(), x)) return true;
  return false;
}

VertexSet set_union(const VertexSet& a, const VertexSet& b) {
  VertexSet u = a;
  u.insert(u.end(), b.begin(), b.end());
  return normalized(u);
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome formula_suite_check() {
  auto rep = formula_suite(KernelSpec::reference(), 200, 1, kFormulaRelTol);
  bool pts = true;
  std::uint64_t fails = 0;
  for (const auto& c : rep.checks) {
    pts = pts && c.points == 200;
    fails += c.failures;
  }
  return {rep.passed() && pts, fmt("%zu checks x 200 points, %llu failures, tol %.0e", rep.checks.size(),
                                   static_cast<unsigned long long>(fails), kFormulaRelTol)};
}

Outcome pure_death() {
  const std::uint64_t n = 10000;
  auto est = survival_estimate({-1, 0, 1}, KernelSpec::reference(), params(1.0, 0.0), Window::symmetric(10, 3), 1.0,
                               n, 2);
  double exact = oracle::pure_death_survival(3, 1.0, 1.0);
  double sigma = std::sqrt(exact * (1 - exact) / n);
  return {std::abs(est.theta - exact) <= kSigmas * sigma,
          fmt("theta %.5f vs 1-(1-e^-1)^3 = %.5f, sigma %.5f", est.theta, exact, sigma)};
}

Outcome classical_reduction() {
  KernelSpec k(Sequence::finite_support({1.0}), Sequence::power_law(1, 0));
  const std::uint64_t n = 10000;
  const double horizon = 200.0;
  Window w{0, 1, 1};
  RunningStats s;
  std::uint64_t censored = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    BackgroundPath path(k, params(1.0, 1.0), w, horizon, replica_background_seed(3, i));
    EventLog log = EventLog::uniform(w, horizon, replica_event_seed(3, i), 1.0, 1.0);
    auto tr = simulate_forward({0, 1}, path, log, {horizon});
    if (!tr.extinction_time) ++censored;
    s.add(tr.extinction_time.value_or(horizon));
  }
  double exact = oracle::complete_graph_mean_extinction(2, 1.0, 1.0);
  return {censored == 0 && std::abs(s.mean() - exact) <= kSigmas * s.stderr_mean(),
          fmt("mean tau %.4f vs %.4f, sigma %.4f, censored %llu", s.mean(), exact, s.stderr_mean(),
              static_cast<unsigned long long>(censored))};
}

Outcome duality() {
  // P(C^{C}_t meets A) by forward runs against P(C^{A}_t meets C) through the
  // dual exploration, on independent replica banks.
  const VertexSet A{0}, C{3};
  const double t = 2.0;
  const std::uint64_t n = 20000;
  Window w{-10, 10, 20};
  ModelParams m = params(2.0, 0.5);
  KernelSpec ref = KernelSpec::reference();
  std::uint64_t fwd = 0, dual = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    BackgroundPath p1(ref, m, w, t, replica_background_seed(41, i));
    EventLog l1 = EventLog::uniform(w, t, replica_event_seed(41, i), m.lambda, m.r);
    fwd += meets(simulate_forward(C, p1, l1, {t}).infected[0], A);
    BackgroundPath p2(ref, m, w, t, replica_background_seed(42, i));
    EventLog l2 = EventLog::uniform(w, t, replica_event_seed(42, i), m.lambda, m.r);
    dual += meets(simulate_dual(C, t, p2, l2), A);
  }
  double a = double(fwd) / n, b = double(dual) / n;
  double sigma = std::sqrt((a * (1 - a) + b * (1 - b)) / n);
  return {std::abs(a - b) <= kSigmas * sigma, fmt("forward %.4f, dual %.4f, pooled sigma %.4f", a, b, sigma)};
}

Outcome couplings() {
  const std::uint64_t n = 1000;
  KernelSpec ref = KernelSpec::reference();
  std::vector<double> times{0.5, 1.0, 1.5, 2.0};
  Window w = Window::symmetric(25, 4);
  VertexSet A{-2, 0, 3}, B{5};
  std::vector<CoupledRunSpec> runs{{{0}, 0.3}, {{0}, 0.8}, {A, 0.8}, {B, 0.8}, {set_union(A, B), 0.8}};
  std::uint64_t contain = 0, additive = 0, background = 0, wprime = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    auto tr = coupled_runs(runs, ref, params(1.7, 0.8), w, 2.0, derive(51, Tag::replica, {i}), times);
    for (std::size_t j = 0; j < times.size(); ++j) {
      contain += !is_subset(tr[0].infected[j], tr[1].infected[j]) || !is_subset(tr[1].infected[j], tr[2].infected[j]);
      additive += tr[4].infected[j] != set_union(tr[2].infected[j], tr[3].infected[j]);
    }
    std::uint64_t s = derive(52, Tag::replica, {i});
    Window bw = Window::symmetric(8, 3);
    BackgroundPath lo(ref, params(1.0, 0.3), bw, 2.0, s);
    auto hi = std::make_shared<BackgroundPath>(ref, params(1.0, 0.8), bw, 2.0, s);
    for (Vertex x = -8; x <= 8; ++x)
      for (std::int64_t k = 1; k <= 3 && x + k <= 8; ++k)
        for (int u = 0; u <= 20; ++u) background += lo.is_open(Edge(x, x + k), 0.1 * u) && !hi->is_open(Edge(x, x + k), 0.1 * u);
    BlockTable table(hi, 0.5, s);
    for (Vertex x = -8; x <= 8; ++x)
      for (std::int64_t k = 1; k <= 3 && x + k <= 8; ++k)
        for (int b = 0; b < table.blocks(); ++b) wprime += table.wprime(Edge(x, x + k), b) > table.w(Edge(x, x + k), b);
  }
  ZAuditOptions o;
  o.T = 0.5;
  o.generations = 2;
  o.boxes = 4;
  auto rep = audit_Z(ref, params(1.0, 0.5), {0}, n, 53, o);
  std::uint64_t total = contain + additive + background + wprime + rep.u_violations + rep.w_violations + rep.z_violations;
  return {total == 0 && rep.replicas == n,
          fmt("violations: C %llu, additivity %llu, background %llu, w' %llu, U %llu, W %llu, Z %llu",
              static_cast<unsigned long long>(contain), static_cast<unsigned long long>(additive),
              static_cast<unsigned long long>(background), static_cast<unsigned long long>(wprime),
              static_cast<unsigned long long>(rep.u_violations), static_cast<unsigned long long>(rep.w_violations),
              static_cast<unsigned long long>(rep.z_violations))};
}

Outcome containment_audits() {
  const std::uint64_t n = 1000;
  KernelSpec ref = KernelSpec::reference();
  YOptions yo;
  yo.window = Window::symmetric(15, 6);
  std::uint64_t y_viol = 0;
  for (std::uint64_t s = 0; s < n; ++s)
    y_viol += simulate_Y({0}, 0.5, ref, params(1.5, 0.5), 3, derive(61, Tag::replica, {s}), true, yo).violations;
  ZAuditOptions o;
  o.T = 0.5;
  o.generations = 2;
  o.boxes = 4;
  auto rep = audit_Z(ref, params(1.0, 0.5), {0}, n, 62, o);
  std::uint64_t total = y_viol + rep.ctilde_violations + rep.containment_violations + rep.partition_violations;
  return {total == 0, fmt("violations: C in C~ %llu, C~ in Y %llu, box(C~) in Z %llu, partition %llu",
                          static_cast<unsigned long long>(rep.ctilde_violations),
                          static_cast<unsigned long long>(y_viol),
                          static_cast<unsigned long long>(rep.containment_violations),
                          static_cast<unsigned long long>(rep.partition_violations))};
}

Outcome percolation_oracles() {
  bool ok = true;
  std::string detail;
  const std::uint64_t n = 40000;
  std::vector<PercolationSpec> small{PercolationSpec::from_table({0.4}, 1).with_window(0, 6),
                                     PercolationSpec::from_table({0.3, 0.2}, 2).with_window(0, 4),
                                     PercolationSpec::from_table({0.25, 0.15, 0.1}, 3).with_window(-2, 2)};
  int worst_bucket = 0;
  double worst_z = 0.0;
  for (std::size_t s = 0; s < small.size(); ++s) {
    auto pmf = exact_cluster_pmf(0, small[s]);
    std::vector<std::uint64_t> counts(pmf.size() + 1, 0);
    for (std::uint64_t i = 0; i < n; ++i) {
      auto size = sample_cluster(0, small[s], derive(71, Tag::percolation, {s, i})).size();
      ++counts[std::min(size, pmf.size())];
    }
    ok = ok && counts[pmf.size()] == 0 && candidate_edges(small[s]).size() <= kExactPmfMaxEdges;
    for (std::size_t b = 1; b < pmf.size(); ++b) {
      double emp = double(counts[b]) / n, sig = std::sqrt(pmf[b] * (1 - pmf[b]) / n);
      double z = sig > 0 ? std::abs(emp - pmf[b]) / sig : (counts[b] ? INFINITY : 0.0);
      if (z > worst_z) {
        worst_z = z;
        worst_bucket = static_cast<int>(b);
      }
      ok = ok && z <= kSigmas;
    }
  }
  detail += fmt("pmf worst |z| %.2f (size %d)", worst_z, worst_bucket);
  for (double mu : {0.3, 0.5, 0.8}) {
    std::vector<double> b;
    // b_k = (mu/2) 2^-k, so 2 sum_k b_k = mu up to 2^-48
    for (int k = 1; k <= 48; ++k) b.push_back(mu / 2 * std::pow(0.5, k));
    auto spec = PercolationSpec::from_table(b, 48);
    RunningStats st;
    for (std::uint64_t i = 0; i < 20000; ++i)
      st.add(double(sample_cluster(0, spec, derive(72, Tag::percolation, {std::uint64_t(mu * 10), i})).size()));
    double bound = 1.0 / (1.0 - spec.mu());
    ok = ok && st.mean() + kSigmas * st.stderr_mean() <= bound;
    detail += fmt("; mu %.1f mean %.3f <= %.3f", mu, st.mean(), bound);
  }
  auto geo = PercolationSpec::from_function([](std::int64_t k) { return std::pow(0.5, double(k + 1)); },
                                            TermForm{0.5, 0.0, 0.5}, 0, 40);
  std::vector<double> head;
  for (int k = 1; k <= 60; ++k) head.push_back(std::pow(0.5, k + 1));
  double exact = oracle::cut_density(head);
  auto cr = cut_analysis(geo, 0, 4000, 40, 73);
  bool cut_ok = std::abs(cr.density - exact) <= kSigmas * cr.density_sigma + cr.false_cut_bound;
  ok = ok && cut_ok;
  detail += fmt("; cut density %.5f vs %.5f, sigma %.5f", cr.density, exact, cr.density_sigma);
  return {ok, detail};
}

Outcome bercomp() {
  const double p = 0.5, v = 1.0, T = 1.0;
  const int n = 100000;
  KernelSpec ref = KernelSpec::reference();  // p_1 = v_1 = 1
  BackgroundPath path(ref, params(1.0, p), Window{0, 1, 1}, n * T, 81);
  Edge e(0, 1);
  auto X = block_indicators(path.timeline(e), T, n);
  TwoStateOracle o(p, v, T, p);
  double d = delta_block_rate(p, v, T);
  auto r = bercomp_couple(X, o, d, [e](std::size_t i) { return block_chi(81, e, static_cast<int>(i)); });
  std::uint64_t viol = 0, ones = 0;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    viol += r.xprime[i] > X[i];
    ones += r.xprime[i];
    xs[i] = r.xprime[i];
  }
  double chi = std::pow(double(ones) - n * d, 2) / (n * d * (1 - d));
  double pval = chi2_sf(chi, 1);
  double worst = 0.0;
  for (std::size_t lag = 1; lag <= 4; ++lag) worst = std::max(worst, std::abs(autocorrelation(xs, lag)));
  double sig = 1.0 / std::sqrt(double(n));
  return {viol == 0 && pval > kChi2MinP && worst <= kSigmas * sig,
          fmt("delta %.5f, X'>X %llu, chi2 p %.3f, max |acf 1..4| %.4f (3 sigma %.4f)", d,
              static_cast<unsigned long long>(viol), pval, worst, kSigmas * sig)};
}

Outcome immunization() {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto c = find_q0(1.0, KernelSpec::reference(), 1.0, 0.3, 0.99, seed);
    if (!c.certified) {
      ok = false;
      detail += fmt("seed %llu: %s (%s); ", static_cast<unsigned long long>(seed), c.verdict.c_str(), c.failing.c_str());
      continue;
    }
    double q0 = c.output.at("q0"), T = c.output.at("T");
    ModelParams m = params(1.0, q0);
    auto ey = estimate_EY1(0, T, KernelSpec::reference(), m, 20000, derive(seed, Tag::coin, {9}));
    bool line = q0 > 0 && ey.mean + kSigmas * ey.stderr_ + ey.bias_bound < 1.0;
    ok = ok && line;
    detail += fmt("seed %llu: q0 %.3g at T %g, E|Y1| %.4f +- %.4f; ", static_cast<unsigned long long>(seed), q0, T,
                  ey.mean, ey.stderr_);
  }
  return {ok, detail};
}

Outcome slow_speed() {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto c = find_gamma_star(1.0, 0.5, KernelSpec::reference(), 0.3, 0.99, seed);
    if (!c.certified) {
      ok = false;
      detail += fmt("seed %llu: %s (%s); ", static_cast<unsigned long long>(seed), c.verdict.c_str(), c.failing.c_str());
      continue;
    }
    double lg = c.output.at("log10_gamma_star");
    ok = ok && std::isfinite(lg) && c.corroboration.passed;
    detail += fmt("seed %llu: log10 gamma* %.3f, E|Z'1| %.4f +- %.4f; ", static_cast<unsigned long long>(seed), lg,
                  c.corroboration.mean, c.corroboration.stderr_);
  }
  return {ok, detail};
}

Outcome speed_sweep() {
  // gamma^-1 lambda_cross should not increase from gamma = 1 to gamma = 2
  std::vector<double> lambdas;
  for (double l = 1.0; l <= 6.01; l += 0.5) lambdas.push_back(l);
  ScanOptions o;
  o.threshold = 0.3;
  o.bisection_steps = 3;
  std::vector<Interval> br;
  std::string detail;
  for (double g : {1.0, 2.0}) {
    auto rep = lambda_c_scan(KernelSpec::reference(), params(1.0, 0.5, g), lambdas, Window::symmetric(40, 4), 8.0,
                             800, 91, o);
    if (!rep.crossing_bracket) return {false, fmt("no crossing at gamma %g", g)};
    br.push_back(*rep.crossing_bracket);
    detail += fmt("gamma %g: crossing in [%.3f, %.3f]; ", g, rep.crossing_bracket->lo, rep.crossing_bracket->hi);
  }
  return {br[0].hi / 1.0 >= br[1].lo / 2.0, detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    bool blocking;
    std::function<Outcome()> run;
  };
  std::vector<Criterion> all{
      {1, "formula suite", 5, true, formula_suite_check},
      {2, "pure-death oracle", 10, true, pure_death},
      {3, "classical CP reduction", 30, true, classical_reduction},
      {4, "self-duality", 120, true, duality},
      {5, "exact couplings", 300, true, couplings},
      {6, "containment audits", 300, true, containment_audits},
      {7, "percolation oracles", 120, true, percolation_oracles},
      {8, "Bernoulli thinning", 60, true, bercomp},
      {9, "immunization certificate", 1200, true, immunization},
      {10, "slow-speed certificate", 1800, true, slow_speed},
      {11, "speed monotonicity sweep", 1800, false, speed_sweep},
  };
  bool blocking_failed = false;
  for (const auto& c : all) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = out.pass && secs < c.budget_s;
    if (!pass && c.blocking) blocking_failed = true;
    std::printf("%s %2d %s%s: %s [%.1f s of %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                c.blocking ? "" : " (non-blocking)", out.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  return blocking_failed ? 1 : 0;
}
