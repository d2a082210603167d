#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace lmix {

// splitmix64. <random> distributions are implementation-defined, so every
// seeded draw in the library goes through this generator to keep outputs
// bitwise reproducible across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, n); n must be > 0. Modulo bias is ~n/2^64, irrelevant at
  /// the batch and grid sizes used here.
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  /// Uniform double in [0, 1).
  double next_unit() { return (next_u64() >> 11) * 0x1.0p-53; }

  /// Seeded Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[next_below(i)]);
    }
  }

 private:
  uint64_t state_;
};

/// Per-ordinal seed derivation (splitmix64 finalizer). Results for ordinal t
/// do not depend on any other ordinal, so work items can run in any order.
inline uint64_t derive_seed(uint64_t master, uint64_t ordinal) {
  uint64_t z = master + (ordinal + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace lmix
