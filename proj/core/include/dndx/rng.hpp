#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace dndx {

/// Mixes a master seed with two stream coordinates (splitmix64 finalizer).
/// Used to give every (generation, genome) evaluation its own stream so
/// results do not depend on scheduling order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

/// Deterministic random stream. The engine is mt19937_64 (fully specified by
/// the standard); the conversions to real/int/normal are done here rather than
/// through <random> distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::size_t uniform_index(std::size_t n);

  /// Standard normal via Box-Muller (one value per call, no cached spare).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <class T>
  const T& pick(std::span<const T> items) {
    if (items.empty()) throw std::invalid_argument("Rng::pick on empty range");
    return items[uniform_index(items.size())];
  }

  template <class It>
  void shuffle(It first, It last) {
    // Fisher-Yates, back to front.
    for (auto n = static_cast<std::size_t>(last - first); n > 1; --n) {
      auto j = uniform_index(n);
      std::swap(first[n - 1], first[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

}  // namespace dndx
