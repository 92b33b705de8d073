#pragma once

#include <cstdint>

namespace singhom {

// SplitMix64. Chosen over the standard engines because the fixture oracle
// re-implements it bit-for-bit, and a stream can be split by seeding with
// derived integers.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Independent child stream for batch item `i`.
  static SplitMix64 split(std::uint64_t seed, std::uint64_t i) {
    SplitMix64 g(seed ^ (0xD1B54A32D192ED03ull * (i + 1)));
    g.next();
    return g;
  }

 private:
  std::uint64_t state_;
};

}  // namespace singhom
