#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace deepforest {

// Derives an independent stream seed from a master seed and a stream tag
// (tree index, fold number, ...). SplitMix64 finalizer over the combination.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t first, Tags... rest) {
  if constexpr (sizeof...(rest) == 0) {
    return derive_seed(seed, first);
  } else {
    return derive_seed(derive_seed(seed, first), static_cast<std::uint64_t>(rest)...);
  }
}

// Seeded random stream. Wraps mt19937_64 (whose output sequence is fixed by
// the standard) and implements its own distributions so that draws are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Unbiased (rejection on the tail).
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller; caches the second variate.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace deepforest
