#pragma once

#include <cstdint>
#include <algorithm>
#include <cstddef>
#include <random>

namespace gcl {

using Rng = std::mt19937_64;

/// Randomness phases. Every stochastic step draws from a stream keyed by
/// (root seed, phase, a, b), so results do not depend on thread count or
/// on the order in which parallel workers run.
enum class Phase : std::uint64_t {
  kInit = 1,
  kRefresh = 2,
  kRebuild = 3,
  kBatch = 4,
  kShuffle = 5,
  kProbe = 6,
  kEvalWalk = 7,
  kGenerate = 8,
  kSplit = 9,
  kDemo = 10,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, Phase phase, std::uint64_t a = 0,
                                    std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(root);
  h = splitmix64(h ^ static_cast<std::uint64_t>(phase));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b * 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_stream(std::uint64_t root, Phase phase, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(derive_seed(root, phase, a, b));
}

/// Uniform real in [0, 1). std::uniform_real_distribution is avoided so the
/// bit stream is identical across standard library implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n), unbiased by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

/// Fisher-Yates shuffle on top of uniform_index (std::shuffle's draw pattern
/// is implementation-defined).
template <typename It>
void shuffle_range(It first, It last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_index(rng, i);
    std::iter_swap(first + static_cast<std::ptrdiff_t>(i - 1), first + static_cast<std::ptrdiff_t>(j));
  }
}

}  // namespace gcl
