#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace cpdlp {

// Stream tags used in seed derivation. Values are part of the reproducibility
// contract: changing them changes every output.
enum class Tag : std::uint64_t {
  replica = 1,
  background = 2,
  background_close = 3,
  infection = 4,
  recovery = 5,
  block_chi = 6,
  percolation = 7,
  complete_graph = 8,
  u_chi = 9,
  w_chi = 10,
  ladder = 11,
  events = 12,
  coin = 13,
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t mix64(std::uint64_t z);

// derive(seed, {a, b, ...}) folds each word into the state through the
// splitmix64 finalizer. Streams for (seed, tag, ids...) are therefore fixed
// functions of their coordinates and independent of scheduling order.
std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> words);

inline std::uint64_t derive(std::uint64_t seed, Tag tag, std::initializer_list<std::uint64_t> ids = {}) {
  std::uint64_t s = derive(seed, {static_cast<std::uint64_t>(tag)});
  return ids.size() ? derive(s, ids) : s;
}

// Uniform in [0,1) with 53 random bits.
inline double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

// xoshiro256** seeded from a derived key.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  double uniform() { return to_unit((*this)()); }
  // Uniform in (0,1]; safe inside log.
  double uniform_pos() { return 1.0 - uniform(); }
  double exponential(double rate);
  bool bernoulli(double p) { return uniform() < p; }
  // Number of failures before the first success, success probability p in (0,1].
  // Saturates at kGeometricCap so skip sums stay inside int64.
  static constexpr std::uint64_t kGeometricCap = std::uint64_t{1} << 62;
  std::uint64_t geometric(double p);

 private:
  std::uint64_t s_[4];
};

}  // namespace cpdlp
