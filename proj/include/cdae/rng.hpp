#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace cdae {

/// Deterministic random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Distributions are implemented here rather than taken from
/// <random> because library distributions are implementation-defined:
///   uniform()   53 high bits of one draw scaled to [0, 1)
///   below(n)    rejection sampling on the top of the 64-bit range
///   normal()    Box-Muller, one draw pair per call, no caching
/// Child streams are derived with derive(), which mixes the parent seed with a
/// label through SplitMix64 so independent subsystems never share a stream.
class Rng {
 public:
  static constexpr std::uint32_t kAlgorithmVersion = 1;

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Independent generator keyed by (this seed, label).
  Rng derive(std::string_view label) const;
  Rng derive(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
/// FNV-1a, stable across platforms (unlike std::hash).
std::uint64_t stable_hash(std::string_view text);

}  // namespace cdae
