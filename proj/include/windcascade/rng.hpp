#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace windcascade {

/// SplitMix64 (Steele, Lea & Flood 2014). A Weyl counter passed through a
/// fixed 64-bit finaliser, so stream k of seed s is reproducible by any
/// implementation: state_0 = mix(s ^ mix(k + golden)), x_n = mix(state_0 + n * golden).
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Independent child stream, a pure function of (seed, stream id).
  static constexpr SplitMix64 stream(std::uint64_t seed, std::uint64_t id) noexcept {
    return SplitMix64(mix(seed ^ mix(id + kGolden)));
  }

  constexpr std::uint64_t operator()() noexcept {
    state_ += kGolden;
    return mix(state_);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), unbiased (rejection on the short tail).
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do x = (*this)();
    while (x >= limit);
    return x % n;
  }

  /// Fisher-Yates shuffle driven by below().
  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace windcascade
