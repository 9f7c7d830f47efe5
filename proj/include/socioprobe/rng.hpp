#pragma once

// Deterministic random number generation shared by every stochastic step
// (splits, subsampling, probe initialization, mini-batch order, synthetic
// data). Everything here is fully specified so results can be reproduced by
// an independent implementation:
//
//   splitmix64(state):   state += 0x9E3779B97F4A7C15
//                        z = state
//                        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//                        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//                        return z ^ (z >> 31)
//
//   Rng(seed):           xoshiro256** whose four state words are the first
//                        four splitmix64 outputs starting from state = seed.
//
//   bounded(n):          floor(next() * n / 2^64) using a 128-bit product.
//   uniform():           (next() >> 11) * 2^-53, in [0, 1).
//   normal():            Box-Muller on u1 = 1 - uniform(), u2 = uniform();
//                        returns sqrt(-2 ln u1) * cos(2 pi u2) (one variate
//                        per pair, no caching).
//
//   shuffle(v):          Fisher-Yates, for i = n-1 down to 1:
//                        swap(v[i], v[bounded(i + 1)]).
//
//   derive_seed(s, k):   splitmix64 applied to (s ^ splitmix64(k)), i.e. the
//                        first splitmix64 output with state = s ^ mix(k)
//                        where mix(k) is the first output with state = k.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace socioprobe {

constexpr std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Combines a parent seed and a stream index into an independent child seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t k = index;
  std::uint64_t s = seed ^ splitmix64_next(k);
  return splitmix64_next(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  std::uint64_t bounded(std::uint64_t n);
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace socioprobe
