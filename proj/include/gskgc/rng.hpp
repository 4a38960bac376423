#pragma once

#include <cstdint>
#include <vector>

namespace gskgc {

// Counter-based stream derivation: every (seed, key) pair gets its own
// SplitMix64 stream, so per-query draws do not depend on iteration order.
// Bounded draws avoid std::uniform_int_distribution, whose output differs
// between standard library implementations.

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  constexpr explicit SplitMix64(std::uint64_t state) : state_(state) {}

  /// Stream for `key` under global `seed`.
  static constexpr SplitMix64 derive(std::uint64_t seed, std::uint64_t key) {
    return SplitMix64(splitmix64_mix(seed ^ splitmix64_mix(key + 0x9e3779b97f4a7c15ULL)));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  constexpr result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64_mix(state_);
  }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// k distinct indices drawn uniformly from [0, n), returned in ascending
/// order. k is clamped to n.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, SplitMix64& rng);

}  // namespace gskgc
