#include "doctest.h"

#include <cmath>

#include "cpdlp/percolation.hpp"
#include "cpdlp/stats.hpp"
#include "oracles/oracles.hpp"

using namespace cpdlp;

TEST_CASE("trivial clusters") {
  auto none = PercolationSpec::from_table({0.0, 0.0}, 2);
  auto c = sample_cluster(5, none, 1);
  CHECK(c.size() == 1);
  CHECK(c.vertices == VertexSet{5});

  auto chain = PercolationSpec::from_table({1.0}, 1).with_window(-3, 3);
  auto d = sample_cluster(0, chain, 2);
  CHECK(d.vertices == VertexSet{-3, -2, -1, 0, 1, 2, 3});
  CHECK_FALSE(d.cap_hit);
}

TEST_CASE("exact pmf by enumeration") {
  auto one = exact_cluster_pmf(0, {{Edge(0, 1), 0.3}});
  CHECK(one[1] == doctest::Approx(0.7));
  CHECK(one[2] == doctest::Approx(0.3));
  auto path = exact_cluster_pmf(0, {{Edge(0, 1), 0.5}, {Edge(1, 2), 0.5}});
  CHECK(path[1] == doctest::Approx(0.5));
  CHECK(path[2] == doctest::Approx(0.25));
  CHECK(path[3] == doctest::Approx(0.25));

  std::vector<WeightedEdge> es{{Edge(0, 1), 0.4}, {Edge(1, 3), 0.2}, {Edge(0, 2), 0.7},
                               {Edge(2, 3), 0.1}, {Edge(-1, 3), 0.5}, {Edge(-1, 0), 0.3}};
  std::vector<oracle::Edge> oe;
  for (const auto& e : es) oe.push_back({e.edge.a, e.edge.b, e.prob});
  auto lib = exact_cluster_pmf(0, es);
  auto ref = oracle::cluster_pmf(0, oe);
  for (std::size_t s = 1; s < ref.size(); ++s) CHECK(lib.at(s) == doctest::Approx(ref[s]).epsilon(1e-12));
}

TEST_CASE("sampled clusters follow the exact pmf") {
  auto spec = PercolationSpec::from_table({0.35, 0.2}, 2).with_window(-2, 2);
  REQUIRE(candidate_edges(spec).size() <= kExactPmfMaxEdges);
  auto pmf = exact_cluster_pmf(0, spec);
  const int n = 40000;
  std::vector<int> hist(pmf.size() + 1, 0);
  for (int i = 0; i < n; ++i) ++hist[sample_cluster(0, spec, derive(3, Tag::percolation, {std::uint64_t(i)})).size()];
  for (std::size_t s = 1; s < pmf.size(); ++s) {
    double p = pmf[s];
    CHECK(std::abs(hist[s] / double(n) - p) <= 4 * std::sqrt(p * (1 - p) / n) + 1e-12);
  }
}

TEST_CASE("mean cluster size is bounded by the progeny mean") {
  auto spec = PercolationSpec::from_table({0.25}, 1);
  CHECK(spec.mu() == doctest::Approx(0.5));
  RunningStats s;
  for (std::uint64_t i = 0; i < 20000; ++i) s.add(double(sample_cluster(0, spec, derive(4, Tag::percolation, {i})).size()));
  CHECK(s.mean() <= 2.0 + 3 * s.stderr_mean());
}

TEST_CASE("tails of a function-defined spec") {
  auto spec = PercolationSpec::from_function([](std::int64_t k) { return std::pow(0.5, double(k + 1)); },
                                             TermForm{0.5, 0.0, 0.5}, 0, 20);
  CHECK(spec.mu() >= 1.0 - 1e-12);
  CHECK(spec.mu() <= 1.0 + 1e-6);
  CHECK(spec.tail_mass(20) >= std::pow(0.5, 21) * (1 - 1e-12));
  CHECK(spec.tail_first_moment(20) >= 21 * std::pow(0.5, 22));
  CHECK(spec.with_cutoff(5).cutoff() == 5);
  CHECK(spec.with_cutoff(5).prepared().tail_mass >= std::pow(0.5, 6));
}

TEST_CASE("cut densities") {
  auto half = PercolationSpec::from_table({0.5}, 1);
  auto a = analytic_cut_density(half);
  CHECK(a.lo == doctest::Approx(0.5));
  CHECK(a.hi == doctest::Approx(0.5));
  auto rep = cut_analysis(half, 0, 2000, 50, 7);
  CHECK(std::abs(rep.density - 0.5) < 3 * rep.density_sigma + 1e-12);
  CHECK(rep.density_passed);

  auto empty = PercolationSpec::from_table({0.0}, 1);
  auto e = cut_analysis(empty, 0, 100, 3, 1);
  CHECK(e.density == 1.0);

  auto geo = PercolationSpec::from_function([](std::int64_t k) { return std::pow(0.5, double(k + 1)); },
                                            TermForm{0.5, 0.0, 0.5}, 0, 40);
  std::vector<double> head;
  for (int k = 1; k <= 60; ++k) head.push_back(std::pow(0.5, k + 1));
  double exact = oracle::cut_density(head);
  auto g = analytic_cut_density(geo);
  CHECK(g.lo <= exact);
  CHECK(g.hi >= exact);
  CHECK(g.hi - g.lo < 1e-9);
  auto gr = cut_analysis(geo, 0, 4000, 40, 9);
  CHECK(std::abs(gr.density - exact) < 3 * gr.density_sigma + gr.false_cut_bound);
  CHECK(gr.iid_passed);
  for (auto gap : gr.gaps) CHECK(gap >= 1);
}

TEST_CASE("cut indicators match single-length density") {
  auto half = PercolationSpec::from_table({0.5}, 1);
  Rng g(derive(2, Tag::percolation));
  auto cuts = sample_cut_indicators(half, 100000, g);
  double m = 0.0;
  for (auto c : cuts) m += c;
  m /= double(cuts.size());
  CHECK(std::abs(m - 0.5) < 4 * std::sqrt(0.25 / 100000));
}

TEST_CASE("edge uniforms are keyed by configuration and edge") {
  CHECK(edge_uniform(1, Edge(0, 3)) == edge_uniform(1, Edge(3, 0)));
  CHECK(edge_uniform(1, Edge(0, 3)) != edge_uniform(2, Edge(0, 3)));
}

TEST_CASE("cut indicators with vanishing long-edge probabilities") {
  auto spec = PercolationSpec::from_function([](std::int64_t k) { return 0.25 * std::pow(0.5, double(k - 1)); },
                                             TermForm{0.5, 0.0, 0.5}, 0, 200);
  Rng g(derive(4, Tag::percolation));
  auto cut = sample_cut_indicators(spec, 500, g);
  CHECK(cut.size() == 500);
  auto cl = sample_cluster(0, spec, 4);
  CHECK(cl.size() >= 1);
}
