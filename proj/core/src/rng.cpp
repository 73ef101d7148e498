#include "mbflow/rng.hpp"

#include <algorithm>

namespace mbflow {
namespace {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t CounterRng::bits(std::uint64_t counter) const noexcept {
  // Three chained finalizer rounds so that neighbouring keys decorrelate.
  std::uint64_t h = splitmix64(seed_);
  h = splitmix64(h ^ stream_);
  return splitmix64(h ^ counter);
}

double CounterRng::uniform(std::uint64_t counter) const noexcept {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

std::size_t sample_categorical(std::span<const double> cumulative, double x) noexcept {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
  if (it == cumulative.end()) return cumulative.empty() ? 0 : cumulative.size() - 1;
  return static_cast<std::size_t>(it - cumulative.begin());
}

}  // namespace mbflow
