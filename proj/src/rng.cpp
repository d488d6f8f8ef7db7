#include "cpdlp/rng.hpp"

#include <cmath>

namespace cpdlp {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  return mix64(state);
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t w : words) {
    h = mix64(h + 0x9e3779b97f4a7c15ULL + mix64(w ^ 0xbb67ae8584caa73bULL));
  }
  return h;
}

static inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

Rng::Rng(std::uint64_t key) {
  std::uint64_t st = key;
  for (auto& w : s_) w = splitmix64(st);
}

Rng::result_type Rng::operator()() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::exponential(double rate) { return -std::log(uniform_pos()) / rate; }

std::uint64_t Rng::geometric(double p) {
  if (p >= 1.0) return 0;
  double g = std::floor(std::log(uniform_pos()) / std::log1p(-p));
  if (!(g < 0x1p62)) return kGeometricCap;
  return static_cast<std::uint64_t>(g);
}

}  // namespace cpdlp
