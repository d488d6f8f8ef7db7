#include "doctest.h"

#include <cmath>
#include <memory>

#include "cpdlp/certificates.hpp"
#include "cpdlp/kernelcp.hpp"
#include "oracles/oracles.hpp"

using namespace cpdlp;

namespace {

G1Level level(bool x, bool u, Vertex lo = -10, Vertex hi = 10) {
  G1Level g;
  g.X = [x](const Edge&) { return x; };
  g.U = [u](Vertex) { return u; };
  g.in_window = [lo, hi](Vertex v) { return v >= lo && v <= hi; };
  g.cutoff = 2;
  return g;
}

G2Level zlevel(std::int64_t lo, std::int64_t hi) {
  G2Level g;
  g.k_lo = lo;
  g.k_hi = hi;
  g.X = [](std::int64_t) { return false; };
  g.U = [](std::int64_t) { return false; };
  return g;
}

ModelParams params(double lambda, double q, double gamma = 1.0) {
  ModelParams m;
  m.lambda = lambda;
  m.q = q;
  m.gamma = gamma;
  return m;
}

}  // namespace

TEST_CASE("G1 step rules") {
  CHECK(y_step({0, 3}, level(false, false)).empty());
  CHECK(y_step({0, 3}, level(false, true)) == VertexSet{0, 3});
  auto all = y_step({0}, level(true, false, -2, 2));
  CHECK(all == VertexSet{-2, -1, 0, 1, 2});

  // one open edge {0, 2}: its endpoints survive without U
  G1Level g = level(false, false);
  g.X = [](const Edge& e) { return e == Edge(0, 2); };
  CHECK(y_step({0}, g) == VertexSet{0, 2});
  CHECK(y_step({1}, g).empty());
}

TEST_CASE("Y keeps its initial set when every vertical edge is present") {
  G1Level g = level(false, true);
  g.X = [](const Edge& e) { return (e.a * 7 + e.b * 3) % 5 == 0; };
  VertexSet Y{-4, 0, 5};
  for (int n = 0; n < 5; ++n) {
    VertexSet next = y_step(Y, g);
    CHECK(is_subset(Y, next));
    Y = next;
  }
}

TEST_CASE("Y contains the dominating process") {
  YOptions o;
  o.window = Window::symmetric(15, 6);
  std::uint64_t violations = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    auto run = simulate_Y({0}, 0.5, KernelSpec::reference(), params(1.5, 0.5), 3, derive(41, Tag::replica, {s}), true, o);
    REQUIRE(run.Y.size() == 4);
    violations += run.violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("E|Y_1| without live edges is the no-recovery probability") {
  for (double T : {0.5, 2.0}) {
    auto est = estimate_EY1(0, T, KernelSpec::reference(), params(1.0, 0.0), 20000, 3);
    double exact = std::exp(-T);
    CHECK(std::abs(est.mean - exact) < 4 * est.stderr_ + 1e-12);
    CHECK(est.ci.lo <= exact);
    CHECK(est.ci.hi >= exact);
  }
}

TEST_CASE("E|Y_1| tends to one for short blocks") {
  // no live edges: |Y_1| = U, and U = 1 almost surely as T -> 0
  auto est = estimate_EY1(0, 1e-6, KernelSpec::reference(), params(1.0, 0.0), 4000, 5);
  CHECK(est.mean >= 1.0 - 1e-5);
  CHECK(est.ci.hi >= 1.0 - 1e-5);
}

TEST_CASE("immunization certificate on the reference kernel") {
  Q0Options o;
  o.tail_replicas = 5000;
  o.ey1_replicas = 2000;
  auto c1 = find_q0(1.0, KernelSpec::reference(), 1.0, 0.3, 0.99, 1, o);
  REQUIRE(c1.certified);
  CHECK(c1.kind == "immunization");
  double q0 = c1.output.at("q0");
  CHECK(q0 > 0.0);
  CHECK(q0 <= 1.0);
  CHECK(c1.corroboration.passed);
  CHECK(c1.corroboration.ci.hi < 1.0);
  for (const auto& line : c1.ladder)
    if (line.at.count("T") && line.at.at("T") == c1.output.at("T") && line.param != "mu") CHECK(line.passed);

  // a faster background certifies at least as small a q0, up to one ladder rung
  auto c2 = find_q0(4.0, KernelSpec::reference(), 1.0, 0.3, 0.99, 1, o);
  REQUIRE(c2.certified);
  CHECK(c2.output.at("q0") <= 4.0 * q0);

  // different seeds land on the same rung
  auto c3 = find_q0(1.0, KernelSpec::reference(), 1.0, 0.3, 0.99, 2, o);
  CHECK(c3.output.at("q0") == q0);
}

TEST_CASE("partitions from short edges") {
  BoxGeometry g{2, 3};
  CHECK(g.period() == 7);
  CHECK(g.Dmax(1).size() == 2 * (g.K0 + g.r0));
  CHECK(g.M(1).lo == 7);
  CHECK(g.mid(0).lo == 2);
  CHECK(g.right(0).hi == 6);

  Window w{-40, 40, 6};
  auto closed = BlockTable::constant(w, 1.0, 1, true);
  auto part = build_partition(closed, g, 0, -3, 3);
  for (std::int64_t k = -4; k <= 3; ++k) {
    CHECK(part.anchor(k) == g.mid(k).hi);
    CHECK_FALSE(part.x(k));
  }
  for (std::int64_t k = -3; k <= 3; ++k) {
    CHECK(part.D(k).lo == g.mid(k - 1).hi + 1);
    CHECK(part.D(k).hi == g.mid(k).hi);
    CHECK(part.box_of(g.mid(k).hi) == k);
    CHECK(part.isolated(k));
  }
  auto open = BlockTable::constant(w, 1.0, 1, false);
  auto linked = build_partition(open, g, 0, -3, 3);
  for (std::int64_t k = -3; k <= 3; ++k) CHECK_FALSE(linked.isolated(k));
}

TEST_CASE("cuts read only short edges") {
  KernelSpec ref = KernelSpec::reference();
  auto path = std::make_shared<BackgroundPath>(ref, params(1.0, 0.9), Window{-30, 30, 8}, 2.0, 4);
  BlockTable table = build_wprime(path, 1.0, 4);
  BoxGeometry g{2, 2};
  for (int n = 0; n < 2; ++n)
    for (Vertex m = -20; m <= 20; ++m) {
      bool cut = true;
      for (Vertex x = m - 2 * g.K0 + 1; x <= m; ++x)
        for (Vertex y = m + 1; y <= x + 2 * g.K0; ++y)
          if (!table.wprime(Edge(x, y), n)) cut = false;
      CHECK(is_cut(table, g, n, m) == cut);
    }
}

TEST_CASE("no long edges means no W") {
  Window w{-60, 60, 12};
  auto closed = BlockTable::constant(w, 1.0, 1, true);
  EventLog log = EventLog::uniform(w, 1.0, 3, 1.0, 1.0);
  BoxGeometry g{1, 1};
  auto [part, xwu] = build_partition_and_XWU(closed, log, g, 0, -4, 4, params(1.0, 0.5));
  for (const auto& e : xwu.W) {
    CHECK_FALSE(e.W);
    CHECK_FALSE(e.Wprime);
  }
  for (std::int64_t k = -4; k <= 4; ++k) CHECK(xwu.uprime(k) >= xwu.u(k));
}

TEST_CASE("G2 step rules") {
  G2Level g = zlevel(-10, 10);
  CHECK(z_step({0, 4}, g).empty());

  G2Level x = zlevel(-10, 10);
  x.X = [](std::int64_t k) { return k == 0; };
  auto z = z_step({0}, x);
  CHECK(is_subset(VertexSet{-1, 0, 1, 2}, z));

  G2Level u = zlevel(-10, 10);
  u.U = [](std::int64_t k) { return k == 3; };
  CHECK(z_step({3}, u) == VertexSet{2, 3, 4});
  CHECK(z_step({10}, zlevel(-10, 10)).empty());
  u.k_hi = 3;
  CHECK(z_step({3}, u) == VertexSet{2, 3});

  G2Level w = zlevel(-10, 10);
  w.W = {{0, 5}};
  CHECK(z_step({0}, w) == VertexSet{-1, 0, 1, 4, 5, 6});
}

TEST_CASE("Z' with nothing active dies") {
  std::vector<BlockPartition> parts(1);
  std::vector<XWUTable> tables(1);
  BoxGeometry g{1, 1};
  Window win{-40, 40, 4};
  auto closed = BlockTable::constant(win, 1.0, 1, true);
  parts[0] = build_partition(closed, g, 0, -3, 3);
  tables[0].k_lo = -3;
  tables[0].k_hi = 3;
  tables[0].U.assign(7, 0);
  tables[0].Uprime.assign(7, 0);
  auto run = simulate_Zprime({0}, parts, tables, 1);
  CHECK(run.Zprime.at(1).empty());
  CHECK(run.Z.at(1).empty());
}

TEST_CASE("coupled Z audit on the reference kernel") {
  ZAuditOptions o;
  o.T = 0.5;
  o.generations = 2;
  o.boxes = 4;
  auto rep = audit_Z(KernelSpec::reference(), params(1.0, 0.5), {0}, 1000, 12, o);
  CHECK(rep.replicas == 1000);
  CHECK(rep.u_violations == 0);
  CHECK(rep.w_violations == 0);
  CHECK(rep.z_violations == 0);
  CHECK(rep.containment_violations == 0);
  CHECK(rep.ctilde_violations == 0);
  CHECK(rep.isolated.mean() > 0.0);
  CHECK(rep.isolated.mean() < 1.0);
  CHECK(rep.partition_violations == 0);
  // U' is Bernoulli(eps3) given the partition
  CHECK(std::abs(rep.uprime.mean() - rep.eps3) < 4 * rep.uprime.stderr_mean() + 1e-12);
  std::vector<double> a, b;
  for (std::size_t i = 0; i + 1 < rep.uprime_means.size(); i += 2) {
    a.push_back(rep.uprime_means[i]);
    b.push_back(rep.uprime_means[i + 1]);
  }
  CHECK(std::abs(pearson(a, b)) < 4 / std::sqrt(double(a.size())));
}

TEST_CASE("error terms") {
  KernelSpec ref = KernelSpec::reference();
  // a dead background leaves only the cut-free term
  EpsOptions cheap;
  cheap.eps1_replicas = 0;
  auto dead = eps_bounds(2, 2, ref, 0.0, 1, 0.99, cheap);
  CHECK(dead.eps2 == 0.0);  // delta = 1 beyond 2 K0
  CHECK(dead.a_total == 0.0);
  for (double y : {5.0, 50.0}) CHECK(delta_slow(std::int64_t(y), ref, 0.0) == 1.0);

  EpsOptions o;
  o.eps1_replicas = 2000;
  double prev = 2.0;
  for (std::int64_t r0 : {2, 8, 32}) {
    auto eb = eps_bounds(r0, r0, ref, 0.5, 7, 0.99, o);
    CHECK(eb.eps1 <= prev);
    prev = eb.eps1;
    CHECK(eb.eps1 >= eb.eps1_mc);
    CHECK(eb.a.size() == 8);
    CHECK(eb.a_total >= eb.a_tail);
  }

  // eps3 falls with gamma and matches the exact small-N chain
  auto e1 = eps3_bound(1, 1, 1.0, 1.0, std::log(0.1));
  auto e2 = eps3_bound(1, 1, 1.0, 1.0, std::log(0.01));
  CHECK(e2.value < e1.value);
  REQUIRE(e1.exact.has_value());
  CHECK(*e1.exact == doctest::Approx(oracle::complete_graph_tail(4, 1.0, 1.0, 10.0)).epsilon(1e-8));
  CHECK(*e1.exact <= e1.value);
  CHECK(std::exp(e1.log_mean_time) == doctest::Approx(oracle::complete_graph_mean_extinction(4, 1.0, 1.0)).epsilon(1e-9));
  auto slow = eps3_bound(1, 1, 0.2, 1.0, std::log(0.1));
  CHECK(slow.value < e1.value);
}

TEST_CASE("slow-speed certificate with a dead background") {
  GammaStarOptions o;
  o.eps.eps1_replicas = 2000;
  o.z_replicas = 2000;
  o.tail_replicas = 2000;
  auto c = find_gamma_star(1.0, 0.0, KernelSpec::reference(), 0.3, 0.99, 3, o);
  REQUIRE(c.certified);
  CHECK(c.kind == "slow-speed");
  CHECK(c.output.at("r0") == 1.0);
  CHECK(c.corroboration.passed);
}

TEST_CASE("slower infection certifies a larger gamma") {
  GammaStarOptions o;
  o.eps.eps1_replicas = 2000;
  o.z_replicas = 2000;
  o.tail_replicas = 2000;
  auto fast = find_gamma_star(1.0, 0.05, KernelSpec::reference(), 0.3, 0.99, 3, o);
  auto slow = find_gamma_star(0.5, 0.05, KernelSpec::reference(), 0.3, 0.99, 3, o);
  REQUIRE(fast.certified);
  REQUIRE(slow.certified);
  CHECK(slow.output.at("log10_gamma_star") > fast.output.at("log10_gamma_star"));
}
