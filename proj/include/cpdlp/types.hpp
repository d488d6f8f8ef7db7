#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

namespace cpdlp {

using Vertex = std::int64_t;

// Undirected edge stored with a < b.
struct Edge {
  Vertex a = 0;
  Vertex b = 0;

  Edge() = default;
  Edge(Vertex x, Vertex y) : a(std::min(x, y)), b(std::max(x, y)) {}

  std::int64_t length() const { return b - a; }
  std::uint64_t key() const {
    return (static_cast<std::uint64_t>(a) << 24) ^ static_cast<std::uint64_t>(b - a);
  }
  bool operator==(const Edge&) const = default;
};

struct EdgeHash {
  std::size_t operator()(const Edge& e) const {
    std::uint64_t z = e.key() + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return static_cast<std::size_t>(z ^ (z >> 31));
  }
};

// Vertex range [lo, hi] plus the maximal simulated edge length.
struct Window {
  Vertex lo = 0;
  Vertex hi = 0;
  std::int64_t cutoff = 1;

  static Window symmetric(std::int64_t L, std::int64_t R) { return {-L, L, R}; }

  bool contains(Vertex x) const { return x >= lo && x <= hi; }
  std::int64_t size() const { return hi - lo + 1; }
  // Edges the simulation may touch: short enough and incident to the window.
  bool covers(const Edge& e) const {
    return e.length() >= 1 && e.length() <= cutoff && (contains(e.a) || contains(e.b));
  }
  bool inside(const Edge& e) const {
    return e.length() >= 1 && e.length() <= cutoff && contains(e.a) && contains(e.b);
  }
};

using VertexSet = std::vector<Vertex>;  // sorted, unique

inline VertexSet normalized(VertexSet s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

inline bool is_subset(const VertexSet& a, const VertexSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace cpdlp
