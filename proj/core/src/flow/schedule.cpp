#include "mbflow/flow/schedule.hpp"

#include <cmath>

#include "mbflow/error.hpp"
#include "mbflow/rng.hpp"

namespace mbflow::flow {

namespace {
void check_times(double epsilon, double horizon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("schedule: epsilon must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("schedule: horizon must be positive");
  if (epsilon > horizon * (1.0 + 1e-12)) throw InvalidArgument("schedule: epsilon exceeds the horizon");
}
}  // namespace

std::size_t num_segments(double epsilon, double horizon) {
  check_times(epsilon, horizon);
  const double ratio = horizon / epsilon;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(ratio * (1.0 - 1e-9))));
}

BatchSchedule draw_schedule(const BatchSystem& sys, double epsilon, double horizon, std::uint64_t seed,
                            std::uint64_t stream) {
  return draw_schedule(sys.batch_probs(), epsilon, horizon, seed, stream);
}

BatchSchedule draw_schedule(const std::vector<double>& batch_probs, double epsilon, double horizon,
                            std::uint64_t seed, std::uint64_t stream) {
  if (batch_probs.empty()) throw InvalidArgument("draw_schedule: no batches");
  const std::size_t k_total = num_segments(epsilon, horizon);
  std::vector<double> cumulative(batch_probs.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < batch_probs.size(); ++j) {
    acc += batch_probs[j];
    cumulative[j] = acc;
  }
  BatchSchedule s{epsilon, horizon, {}, seed, stream};
  s.indices.resize(k_total);
  if (batch_probs.size() == 1) return s;
  const CounterRng rng(seed, stream);
  for (std::size_t k = 0; k < k_total; ++k) s.indices[k] = sample_categorical(cumulative, rng.uniform(k));
  return s;
}

BatchSchedule fixed_schedule(double epsilon, double horizon, std::vector<std::size_t> indices) {
  if (indices.size() != num_segments(epsilon, horizon))
    throw InvalidArgument("fixed_schedule: index count does not match ceil(T / epsilon)");
  return {epsilon, horizon, std::move(indices), 0, 0};
}

}  // namespace mbflow::flow
