#pragma once

#include <cstdint>
#include <span>

namespace mbflow {

// Counter-based generator: every draw is a pure function of
// (seed, stream, counter), so streams can be consumed in any order or on any
// thread and still reproduce bit for bit.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : seed_(seed), stream_(stream) {}

  std::uint64_t bits(std::uint64_t counter) const noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

/// Inverse-CDF categorical draw. Returns the smallest j with x < F_j where
/// F is the cumulative sum of probs; ties resolve toward the lower index.
std::size_t sample_categorical(std::span<const double> cumulative, double x) noexcept;

}  // namespace mbflow
