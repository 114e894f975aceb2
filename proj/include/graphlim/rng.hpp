#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace graphlim {

/// Stream identifiers used to split one user seed into independent streams.
/// Every random consumer in the library draws from its own stream so that
/// adding randomness in one place never shifts another.
enum class Stream : std::uint64_t {
  cut_norm = 1,
  cut_p_norm = 2,
  regularity = 3,
  sample_graph = 4,
  sample_graphon = 5,
  sample_digraphon = 6,
  concentration = 7,
  coloring_rounding = 8,
  energy_local = 9,
  energy_fractional = 10,
  energy_sampling = 11,
  nd_testing = 12,
  nd_local = 13,
  distance = 14,
  generator = 15,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based seed derivation: (seed, stream, index) -> 64-bit seed.
inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL));
  return splitmix64(h ^ (index * 0x8cb92ba72f3d8dd7ULL + 0x632be59bd9b4e019ULL));
}

/// Thin wrapper around mt19937_64. The draws below avoid the standard
/// distributions, whose output is implementation-defined, so sequences are
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0)
      : engine_(derive_seed(seed, stream, index)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= threshold) return static_cast<std::size_t>(x % bound);
    }
  }

  bool coin() { return (engine_() >> 63) != 0; }

  /// Uniform q-subset of [0, n), returned in increasing order.
  std::vector<std::size_t> subset(std::size_t n, std::size_t q) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < q; ++i) std::swap(pool[i], pool[i + below(n - i)]);
    pool.resize(q);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace graphlim
