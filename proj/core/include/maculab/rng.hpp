#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "maculab/hash.hpp"

namespace maculab {

/// Deterministic random stream. The engine (xoshiro256++ seeded through
/// splitmix64) and every distribution below are fully specified here, so a
/// given seed produces the same sequence on every platform and compiler.
/// Standard-library distributions are deliberately not used; their output is
/// implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed) {
    // splitmix64 expansion of the seed into the xoshiro state
    uint64_t x = seed;
    for (auto& s : state_) {
      x += 0x9e3779b97f4a7c15ull;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      s = z ^ (z >> 31);
    }
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform real in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  /// Uniform integer in [0, n). n must be positive.
  uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Box-Muller transform; consumes exactly two uniforms per call.
  double normal(double mean, double sd) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  uint64_t seed() const { return seed_; }

  /// Independent substream keyed by (seed, tag, index). Substreams never
  /// perturb each other, so adding a consumer does not shift existing draws.
  Rng derive(std::string_view tag, uint64_t index = 0) const {
    uint64_t h = fnv1a64_u64(seed_);
    h = fnv1a64(tag, h);
    h = fnv1a64_u64(index, h);
    return Rng(h);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t seed_;
  uint64_t state_[4];
};

/// Seed for a derived component, usable without instantiating a stream.
inline uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t index = 0) {
  uint64_t h = fnv1a64_u64(seed);
  h = fnv1a64(tag, h);
  h = fnv1a64_u64(index, h);
  return h;
}

}  // namespace maculab
