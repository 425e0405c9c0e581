#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mopg {

namespace detail {

inline std::uint64_t split_mix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Derives an independent sub-seed from a parent seed and an integer label.
/// Used to give parallelizable work items (mixture pairs, EM components)
/// their own reproducible streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (label + 1));
  return detail::split_mix64(s);
}

/// Deterministic random stream: xoshiro256++ (Blackman/Vigna) seeded through
/// SplitMix64 from a (seed, stream) pair. The same pair reproduces the same
/// sequence on every platform. Distinct stream ids give statistically
/// independent sequences.
///
/// Normal variates use the trigonometric Box-Muller transform, so the number
/// of uniforms consumed never depends on the values drawn and parallel
/// streams stay aligned.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t init = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    for (auto& word : state_) word = detail::split_mix64(init);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal draw. Consumes exactly two uniforms per generated pair.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    // u1 < 1 strictly, so log1p(-u1) is finite.
    const double radius = std::sqrt(-2.0 * std::log1p(-u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Named constructor matching the shared RNG-stream contract.
inline RngStream rng_stream(std::uint64_t seed, std::uint64_t stream = 0) {
  return RngStream(seed, stream);
}

}  // namespace mopg
