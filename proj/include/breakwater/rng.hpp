#pragma once

#include <cmath>
#include <cstdint>

namespace breakwater {

// Self-contained xoshiro256** generator. std::mt19937 plus the std
// distributions are implementation-defined, which would make seeded runs
// differ between standard libraries; this keeps every sampled value
// bit-identical for a given seed.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) {
    // splitmix64 expansion of the seed into the full state
    uint64_t x = seed;
    for (auto& s : state_) {
      x += 0x9e3779b97f4a7c15ULL;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      s = z ^ (z >> 31);
    }
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform double in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform double in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [lo, hi] inclusive
  int uniform_int(int lo, int hi) {
    const uint64_t span = uint64_t(hi - lo) + 1;
    return lo + int(next_u64() % span);
  }

  // standard normal via Box-Muller; no state cached so streams stay splittable
  double normal() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Deterministically derive an independent child seed from this stream's
  // seed material and a pair of tags. Used to split per-individual and
  // per-purpose streams so parallel and serial evaluation orders coincide.
  static uint64_t derive(uint64_t seed, uint64_t tag_a, uint64_t tag_b = 0) {
    uint64_t z = seed ^ (tag_a * 0x9e3779b97f4a7c15ULL) ^
                 (tag_b * 0xd1b54a32d192ed03ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t state_[4];
};

}  // namespace breakwater
