#pragma once

#include <cstdint>

namespace odsage {

// SplitMix64 finalizer; used for seeding and for deriving stream seeds.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent sub-stream seed from (seed, a, b, c). Used so that e.g.
// per-day generation draws from its own stream.
inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ splitmix64(a + 0x243F6A8885A308D3ull));
  h = splitmix64(h ^ splitmix64(b + 0x13198A2E03707344ull));
  h = splitmix64(h ^ splitmix64(c + 0xA4093822299F31D0ull));
  return h;
}

// xoshiro256++ with hand-rolled variate generators. All sampling in the
// project goes through this class so results are reproducible independent
// of the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = x = splitmix64(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  int64_t uniform_i64(int64_t lo, int64_t hi) {  // [lo, hi)
    return lo + static_cast<int64_t>(next_u64() % static_cast<uint64_t>(hi - lo));
  }

  double normal();
  double exponential(double mean);
  int poisson(double lambda);

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace odsage
