#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mbflow/flow/batch_system.hpp"

namespace mbflow::flow {

/// A realized sequence of batch indices j_1..j_K (0-based) with switching
/// times t_k = k * epsilon.
struct BatchSchedule {
  double epsilon = 0.0;
  double horizon = 0.0;
  std::vector<std::size_t> indices;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::size_t size() const { return indices.size(); }
  /// t_k for k = 0..K.
  double switch_time(std::size_t k) const { return static_cast<double>(k) * epsilon; }
  /// Batch used on [t_{k-1}, t_k), k = 1..K.
  std::size_t batch(std::size_t k) const { return indices.at(k - 1); }
};

/// K = ceil(T / epsilon), with a relative slack of 1e-9 so that T an exact
/// multiple of epsilon in decimal does not gain a spurious extra segment.
std::size_t num_segments(double epsilon, double horizon);

/// K i.i.d. draws with P(j_k = j) = pi_j by inverse CDF on the cumulative
/// probabilities; draw k uses counter k of CounterRng(seed, stream).
BatchSchedule draw_schedule(const BatchSystem& sys, double epsilon, double horizon, std::uint64_t seed,
                            std::uint64_t stream = 0);

/// Same, from the probabilities alone.
BatchSchedule draw_schedule(const std::vector<double>& batch_probs, double epsilon, double horizon,
                            std::uint64_t seed, std::uint64_t stream = 0);

/// A schedule with prescribed indices (0-based); must hold exactly
/// num_segments(epsilon, horizon) entries.
BatchSchedule fixed_schedule(double epsilon, double horizon, std::vector<std::size_t> indices);

}  // namespace mbflow::flow
