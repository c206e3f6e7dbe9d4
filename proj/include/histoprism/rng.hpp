#pragma once

#include <cstdint>

namespace histoprism {

/// SplitMix64. Chosen over std:: engines because its output sequence is
/// fully pinned by the algorithm, not by the standard library vendor;
/// datasets and seeding must replay bit-identically everywhere.
///
/// Stream splitting: Rng(seed, stream) mixes the stream id into the state
/// before use, so per-slide / per-tensor streams are independent of how
/// many draws earlier streams consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix(seed + 0x9E3779B97F4A7C15ULL * (stream + 1))) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n). Modulo reduction; the bias of ~n/2^64 is
  /// irrelevant at the sizes used here and the result is portable.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal via Box-Muller; consumes two uniforms per pair and
  /// caches the second value.
  double next_gaussian();

  /// Fisher-Yates shuffle of indices [0, n).
  template <typename Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      auto tmp = v[i - 1];
      v[i - 1] = v[j];
      v[j] = tmp;
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace histoprism
