#include "doctest.h"

#include <cmath>

#include "cpdlp/error.hpp"
#include "cpdlp/kernelcp.hpp"
#include "oracles/oracles.hpp"

using namespace cpdlp;

TEST_CASE("fixed graph survival against the dense generator") {
  using G = std::vector<std::pair<int, int>>;
  struct Case {
    int m;
    G edges;
    std::uint32_t init;
  };
  std::vector<Case> cases{{1, {}, 1},
                          {3, {{0, 1}, {1, 2}}, 1},
                          {3, {{0, 1}, {1, 2}, {0, 2}}, 7},
                          {4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}, 5},
                          {5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}, 1}};
  for (const auto& c : cases)
    for (double lam : {0.0, 0.7, 2.5})
      for (double T : {0.3, 1.0, 3.0}) {
        double lib = fixed_graph_survival(c.m, c.edges, lam, 1.0, T, c.init);
        CHECK(lib == doctest::Approx(oracle::fixed_graph_survival(c.m, c.edges, lam, 1.0, T, c.init)).epsilon(1e-9));
      }
  CHECK(fixed_graph_survival(3, {}, 1.0, 1.0, 1.0, 7) ==
        doctest::Approx(oracle::pure_death_survival(3, 1.0, 1.0)).epsilon(1e-12));
}

TEST_CASE("complete graph extinction against the dense chain") {
  for (std::int64_t N : {1, 3, 6, 10})
    for (double lam : {0.3, 1.0, 2.0}) {
      double m = oracle::complete_graph_mean_extinction(int(N), lam, 1.0);
      CHECK(log_mean_extinction_time(N, lam, 1.0) == doctest::Approx(std::log(m)).epsilon(1e-9));
      for (double h : {0.5, 2.0, 10.0})
        CHECK(exact_extinction_tail(N, lam, 1.0, h) ==
              doctest::Approx(oracle::complete_graph_tail(int(N), lam, 1.0, h)).epsilon(1e-8));
    }
  // large N stays finite in log space
  double big = log_mean_extinction_time(400, 1.0, 1.0);
  CHECK(std::isfinite(big));
  CHECK(big > 300.0);
}

TEST_CASE("complete graph Monte Carlo covers the exact tail") {
  auto rep = complete_graph_extinction(5, 0.5, 1.0, 2.0, 20000, 4, 0.999);
  REQUIRE(rep.exact_tail.has_value());
  double p = *rep.exact_tail, n = 20000;
  CHECK(std::abs(rep.mc_estimate - p) < 4 * std::sqrt(p * (1 - p) / n));
  CHECK(rep.mc_upper >= rep.mc_estimate);
  CHECK(rep.markov_bound >= p);
}

TEST_CASE("infection kernels") {
  auto k = InfectionKernel::from_table({0.5, 0.25, 0.125}, 1.0);
  CHECK(k.rate(2) == 0.25);
  CHECK(k.rate(4) == 0.0);
  CHECK(k.total().upper() == doctest::Approx(0.875));
  CHECK(k.tail_sum(1) == doctest::Approx(0.375));
  CHECK(InfectionKernel::from_table({}, 1.0).is_zero());
  auto div = InfectionKernel::from_function([](std::int64_t j) { return 1.0 / double(j); }, TermForm{1, -1, 1}, 1.0);
  CHECK_THROWS_AS(div.total(), DivergenceError);

  ModelParams m;
  m.lambda = 1.3;
  m.q = 0.6;
  KernelSpec ref = KernelSpec::reference();
  auto ab = kernel_from_abar(m, ref);
  for (std::int64_t j = 1; j <= 50; ++j) {
    CHECK(ab.rate(j) == doctest::Approx(a_bar(j, ref, m)));
    CHECK(ab.rate(j) <= 2 * m.lambda * m.q * ref.p(j) * (1 + 1e-12));
  }
}

TEST_CASE("zero kernel is a pure death process") {
  auto k = InfectionKernel::from_table({}, 1.0);
  auto est = simulate_kernel_cp({0, 1, 2}, k, Window::symmetric(5, 1), 1.0, 20000, 2);
  double exact = oracle::pure_death_survival(3, 1.0, 1.0);
  CHECK(std::abs(est.theta - exact) < 4 * std::sqrt(exact * (1 - exact) / 20000));
}

TEST_CASE("always-open background reproduces the kernel process") {
  KernelSpec open(Sequence::finite_support({1.0}), Sequence::power_law(1, 0));
  ModelParams m;
  m.lambda = 1.8;
  Window w = Window::symmetric(12, 1);
  auto a = survival_estimate({0}, open, m, w, 2.0, 400, 17);
  auto b = simulate_kernel_cp({0}, InfectionKernel::from_table({1.8}, 1.0), w, 2.0, 400, 17);
  CHECK(a.survivors == b.survivors);
  CHECK(a.mean_occupation == doctest::Approx(b.mean_occupation).epsilon(1e-12));
}

TEST_CASE("open-edge infection events dominate the averaged rate") {
  auto rep = edge_domination_check_rate(1.5, 0.4, 2.0, 3.0, 20000, 5);
  CHECK(rep.passed);
  CHECK(rep.mean_passed);
  CHECK(rep.a_bar == doctest::Approx(a_bar_rate(1.5, 2.0, 0.4)));
  CHECK(rep.mean_used + 4 * rep.mean_stderr >= rep.a_bar * 3.0);
  for (const auto& row : rep.rows) CHECK(row.empirical + 4 * row.sigma + 1e-12 >= row.poisson);

  auto closed = edge_domination_check_rate(1.5, 0.0, 2.0, 3.0, 2000, 5);
  CHECK(closed.a_bar == 0.0);
  CHECK(closed.mean_used == 0.0);
  CHECK(closed.passed);

  // always open: Y ~ Poisson(lambda t) and a_bar = min(lambda, v)
  auto open = edge_domination_check_rate(2.0, 1.0, 0.5, 2.0, 20000, 6);
  CHECK(open.a_bar == doctest::Approx(0.5));
  CHECK(std::abs(open.mean_used - 4.0) < 4 * open.mean_stderr);
  CHECK(open.passed);
}

TEST_CASE("two-vertex complete graph") {
  CHECK(std::exp(log_mean_extinction_time(2, 1.0, 1.0)) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(exact_extinction_tail(1, 3.0, 1.0, 0.7) == doctest::Approx(std::exp(-0.7)).epsilon(1e-12));
}

TEST_CASE("averaged-rate kernel survives less than the full process") {
  ModelParams m;
  m.lambda = 2.0;
  m.q = 0.8;
  KernelSpec ref = KernelSpec::reference();
  Window w = Window::symmetric(20, 4);
  auto full = survival_estimate({0}, ref, m, w, 2.0, 2000, 23);
  auto low = simulate_kernel_cp({0}, kernel_from_abar(m, ref), w, 2.0, 2000, 23);
  double sigma = std::hypot(full.stderr_, low.stderr_);
  CHECK(low.theta <= full.theta + 3 * sigma);
}
