#pragma once

#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

namespace pforest {

/// splitmix64, the fixed generator behind every seeded perturbation.
///
/// Chosen over std::mt19937_64 because the whole point here is portability:
/// a (text, seed) pair must yield the same perturbed bytes on every platform
/// and toolchain, and splitmix64 is small enough to pin down exactly.
/// Constants are the public-domain ones from Vigna's reference code.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Unbiased uniform draw from [0, bound). bound must be nonzero.
  uint64_t bounded(uint64_t bound) {
    // Lemire's multiply-shift with rejection of the biased low range.
    uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<uint64_t>(m);
    if (low < bound) {
      const uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        x = next();
        m = static_cast<__uint128_t>(x) * bound;
        low = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  /// Uniform in [0, 1) with 53 bits of precision.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_double() < p; }

 private:
  uint64_t state_;
};

/// First k slots of a seeded Fisher-Yates shuffle of {0, ..., pool-1}:
/// a uniform sample without replacement, returned in draw order.
/// k greater than pool is clamped to pool.
inline std::vector<size_t> draw_without_replacement(size_t pool, size_t k, SplitMix64& rng) {
  std::vector<size_t> idx(pool);
  std::iota(idx.begin(), idx.end(), size_t{0});
  if (k > pool) k = pool;
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + static_cast<size_t>(rng.bounded(pool - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace pforest
