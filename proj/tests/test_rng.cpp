#include "doctest.h"

#include <cmath>
#include <set>

#include "cpdlp/rng.hpp"
#include "cpdlp/stats.hpp"

using namespace cpdlp;

TEST_CASE("derivation is a pure function of its coordinates") {
  CHECK(derive(1, Tag::replica, {3, 0}) == derive(1, Tag::replica, {3, 0}));
  std::set<std::uint64_t> keys;
  for (std::uint64_t s : {1ULL, 2ULL})
    for (Tag t : {Tag::replica, Tag::background, Tag::infection, Tag::recovery})
      for (std::uint64_t i = 0; i < 10; ++i) keys.insert(derive(s, t, {i}));
  CHECK(keys.size() == 80);
  CHECK(derive(1, Tag::replica, {1, 2}) != derive(1, Tag::replica, {2, 1}));
}

TEST_CASE("generator is reproducible") {
  Rng a(42), b(42), c(43);
  bool differ = false;
  for (int i = 0; i < 100; ++i) {
    auto x = a(), y = b(), z = c();
    CHECK(x == y);
    differ = differ || x != z;
  }
  CHECK(differ);
}

TEST_CASE("distribution moments") {
  Rng g(derive(9, Tag::coin));
  const int n = 200000;
  RunningStats u, e, geo;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    double x = g.uniform();
    CHECK_UNARY(x >= 0.0);
    CHECK_UNARY(x < 1.0);
    u.add(x);
    e.add(g.exponential(2.0));
    geo.add(static_cast<double>(g.geometric(0.25)));
    hits += g.bernoulli(0.3);
  }
  CHECK(std::abs(u.mean() - 0.5) < 4 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(e.mean() - 0.5) < 4 * 0.5 / std::sqrt(double(n)));
  // failures before success: mean (1-p)/p, variance (1-p)/p^2
  CHECK(std::abs(geo.mean() - 3.0) < 4 * std::sqrt(12.0 / n));
  CHECK(std::abs(hits / double(n) - 0.3) < 4 * std::sqrt(0.21 / n));
  CHECK(g.geometric(1.0) == 0);
  CHECK(g.uniform_pos() > 0.0);
}

TEST_CASE("geometric saturates for tiny p") {
  Rng g(derive(5, Tag::coin));
  for (int i = 0; i < 100; ++i) {
    auto x = g.geometric(1e-300);
    CHECK(x == Rng::kGeometricCap);
    CHECK(static_cast<std::int64_t>(x) > 0);
  }
}
