#pragma once

#include <cstdint>

namespace simt {

// Splitmix64 step. Used both as a counter-based hash and as the engine
// behind all corpus/training randomness so results do not depend on the
// standard library's distribution implementations.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
  return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)));
}

// Small deterministic RNG stream.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0xA5A5A5A55A5A5A5AULL)) {}

  uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi] inclusive.
  int64_t next_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(next_u64() % span);
  }

 private:
  uint64_t state_;
};

// Counter-based uniform double in [0, 1), pure function of its inputs.
// Per-query model noise is drawn this way so worker sharding cannot change
// any outcome.
inline double hash_uniform(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t h = hash_combine(hash_combine(hash_combine(seed, a), b), c);
  return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
}

}  // namespace simt
