#pragma once

#include <cstdint>
#include <limits>

namespace bbic {

/// Counter-based pseudo-random stream (splitmix64 finalizer over key+counter).
///
/// Contract: identical seed and identical draw sequence yield identical
/// outputs on every platform. Child streams derived via child(label) are
/// statistically independent of the parent and of siblings with distinct
/// labels. All stochastic operations in the library take an explicit stream;
/// there is no global RNG state.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : key_(mix(seed ^ kSalt)) {}

  std::uint64_t next_u64() { return mix(key_ + kGamma * ++counter_); }

  /// Uniform double in [0, 1), 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Uniform index in [0, n). Unbiased (Lemire with rejection).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return next_unit() < p; }

  /// Derive an independent stream keyed by (this stream's key, label).
  /// Does not advance this stream's counter.
  RandomStream child(std::uint64_t label) const {
    RandomStream c(0);
    c.key_ = mix(mix(key_ ^ kChildSalt) + kGamma * (label + 1));
    c.counter_ = 0;
    return c;
  }

  RandomStream child(std::uint64_t a, std::uint64_t b) const {
    return child(a).child(b);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kSalt = 0x8AE3F5D16C9B02DFULL;
  static constexpr std::uint64_t kChildSalt = 0x5851F42D4C957F2DULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace bbic
