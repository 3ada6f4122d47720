#pragma once

#include <cstdint>

namespace mvq {

// Deterministic 64-bit generator (splitmix64). Hand-rolled so that seeded
// runs produce identical streams on every platform and standard library;
// std::uniform_int_distribution makes no such guarantee.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, bound) via rejection. bound must be nonzero.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % bound;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % bound;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return double(next_u64() >> 11) * 0x1.0p-53;
  }

  // Derives an independent child stream; splitmix64 output is well mixed,
  // so one draw is a sound child seed.
  Rng split() { return Rng(next_u64()); }

 private:
  std::uint64_t state_;
};

}  // namespace mvq
