#include "doctest.h"

#include <cmath>

#include "cpdlp/engine.hpp"
#include "oracles/oracles.hpp"

using namespace cpdlp;

namespace {

ModelParams params(double lambda, double q = 1.0, double gamma = 1.0) {
  ModelParams m;
  m.lambda = lambda;
  m.q = q;
  m.gamma = gamma;
  return m;
}

}  // namespace

TEST_CASE("pure death chain") {
  SurvivalOptions o;
  o.confidence = 0.999;
  auto est = survival_estimate({0, 1, 2}, KernelSpec::reference(), params(0.0), Window::symmetric(10, 2), 1.0, 20000,
                               3, o);
  double exact = oracle::pure_death_survival(3, 1.0, 1.0);
  CHECK(est.ci.lo <= exact);
  CHECK(est.ci.hi >= exact);
  CHECK(std::abs(est.theta - exact) < 4 * std::sqrt(exact * (1 - exact) / 20000));
}

TEST_CASE("empty initial set stays empty") {
  BackgroundPath path(KernelSpec::reference(), params(2.0), Window::symmetric(10, 2), 1.0, 1);
  EventLog log = EventLog::uniform(Window::symmetric(10, 2), 1.0, 2, 2.0, 1.0);
  auto tr = simulate_forward({}, path, log, {0.5, 1.0});
  CHECK(tr.extinction_time.has_value());
  for (const auto& s : tr.infected) CHECK(s.empty());
}

TEST_CASE("forward and dual processes agree pathwise") {
  Window w = Window::symmetric(25, 3);
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    BackgroundPath path(KernelSpec::reference(), params(1.5, 0.8), w, 2.0, seed);
    EventLog log = EventLog::uniform(w, 2.0, seed + 100, 1.5, 1.0);
    VertexSet C0{-2, 0, 5};
    auto tr = simulate_forward(C0, path, log, {2.0});
    for (Vertex x = -15; x <= 15; ++x) {
      VertexSet d = simulate_dual({x}, 2.0, path, log);
      bool hit = false;
      for (Vertex y : C0) hit = hit || std::binary_search(d.begin(), d.end(), y);
      bool infected = std::binary_search(tr.infected[0].begin(), tr.infected[0].end(), x);
      CHECK(hit == infected);
    }
  }
}

TEST_CASE("coupled runs are monotone") {
  std::vector<CoupledRunSpec> runs{{{0}, 0.3}, {{0}, 1.0}, {{-1, 0, 1}, 1.0}};
  std::vector<double> times{0.25, 0.5, 1.0, 2.0};
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    auto tr = coupled_runs(runs, KernelSpec::reference(), params(2.0), Window::symmetric(30, 3), 2.0, seed, times);
    REQUIRE(tr.size() == 3);
    for (std::size_t i = 0; i < times.size(); ++i) {
      CHECK(is_subset(tr[0].infected[i], tr[1].infected[i]));
      CHECK(is_subset(tr[1].infected[i], tr[2].infected[i]));
    }
  }
}

TEST_CASE("replica results do not depend on the worker count") {
  SurvivalOptions a, b;
  a.workers = 1;
  b.workers = 3;
  auto x = survival_estimate({0}, KernelSpec::reference(), params(1.2), Window::symmetric(15, 3), 1.5, 300, 9, a);
  auto y = survival_estimate({0}, KernelSpec::reference(), params(1.2), Window::symmetric(15, 3), 1.5, 300, 9, b);
  CHECK(x.survivors == y.survivors);
  CHECK(x.mean_occupation == y.mean_occupation);
  CHECK(x.ledger.mean_suppressed == y.ledger.mean_suppressed);
  CHECK(replica_background_seed(9, 4) != replica_event_seed(9, 4));
}

TEST_CASE("truncation ledger") {
  auto est = survival_estimate({0}, KernelSpec::reference(), params(1.0), Window::symmetric(10, 2), 1.0, 200, 4);
  CHECK(est.ledger.long_edge_bound > 0.0);
  CHECK(est.ledger.total() >= est.ledger.mean_suppressed);
  CHECK(est.ledger.window_lo == -10);
  CHECK(est.ledger.cutoff == 2);
}

TEST_CASE("survival increases with lambda on a common seed") {
  ScanOptions o;
  auto rep = lambda_c_scan(KernelSpec::reference(), params(1.0), {0.0, 5.0}, Window::symmetric(20, 3), 2.0, 400, 6, o);
  REQUIRE(rep.rows.size() >= 2);
  CHECK(rep.rows[0].estimate.theta < rep.rows[1].estimate.theta);
}

TEST_CASE("sequence tails") {
  double exact = 0.0;
  for (std::int64_t k = 11; k < 200000; ++k) exact += std::pow(double(k), -7.0);
  double t = sequence_tail(Sequence::power_law(1, -7), 10);
  CHECK(t >= exact);
  CHECK(t <= exact * 1.5);
  double r = sequence_tail(Sequence::power_law(1, 3), 10, true);
  CHECK(r >= 0.5 / 121.0);
}
