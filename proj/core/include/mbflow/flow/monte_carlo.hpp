#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mbflow/error.hpp"
#include "mbflow/flow/batch_system.hpp"
#include "mbflow/flow/integrators.hpp"
#include "mbflow/flow/schedule.hpp"
#include "mbflow/flow/trajectory.hpp"

namespace mbflow::flow {

/// What a Monte-Carlo error study needs from a problem family: the reference
/// solution and one randomized realization, both sampled on given nodes.
struct MonteCarloModel {
  std::vector<double> batch_probs;
  double horizon = 0.0;
  std::function<std::vector<Vec>(const std::vector<double>& nodes)> reference;
  std::function<std::vector<Vec>(const BatchSchedule& schedule, const std::vector<double>& nodes)> realize;
  /// Squared distance between states; Euclidean when empty.
  std::function<double(const Vec&, const Vec&)> distance_sq;
  int uniform_nodes = 201;
};

struct MonteCarloOptions {
  std::size_t realizations = 2;
  std::uint64_t base_seed = 0;
  /// Worker threads; 0 means std::thread::hardware_concurrency().
  unsigned threads = 1;
};

/// Per-node Monte-Carlo statistics of |v_eps(t) - u(t)|^2 and |v_eps(t) - u(t)|
/// over R realizations seeded base_seed + r.
struct ErrorCurve {
  double epsilon = 0.0;
  std::size_t realizations = 0;
  std::uint64_t base_seed = 0;
  std::vector<double> times;
  std::vector<double> mean_sq;
  std::vector<double> std_err_sq;
  std::vector<double> mean_norm;
  std::vector<double> std_err_norm;
  double sup_mse = 0.0;
  double sup_mse_std_err = 0.0;  // at the node attaining sup_mse
  double sup_norm = 0.0;
  double sup_norm_std_err = 0.0;
};

/// A realization failed inside expectation_error or realization_error. Keeps
/// the epsilon, realization index, seed and (when known) the flow time.
class RealizationError : public Error {
 public:
  enum class Cause { Solver, InvalidArgument, Other };

  RealizationError(const std::string& what, Cause cause, double epsilon, std::size_t realization, std::uint64_t seed,
                   std::optional<double> time)
      : Error(what), cause_(cause), epsilon_(epsilon), realization_(realization), seed_(seed), time_(time) {}

  Cause cause() const noexcept { return cause_; }
  double epsilon() const noexcept { return epsilon_; }
  std::size_t realization() const noexcept { return realization_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::optional<double> time() const noexcept { return time_; }

 private:
  Cause cause_;
  double epsilon_;
  std::size_t realization_;
  std::uint64_t seed_;
  std::optional<double> time_;
};

/// Runs R >= 2 realizations, possibly in parallel; the statistics are summed
/// in realization order so the result does not depend on the thread count.
ErrorCurve expectation_error(const MonteCarloModel& model, double epsilon, const MonteCarloOptions& opts);

/// Squared error per node of the single realization seeded `seed`. Failures
/// are reported as RealizationError with realization index 0.
std::vector<double> realization_error(const MonteCarloModel& model, double epsilon, std::uint64_t seed,
                                      std::vector<double>* times = nullptr);

enum class ErrorMetric { Squared, Norm };

struct SlopeFit {
  double slope = 0.0;
  double std_err = 0.0;
  double intercept = 0.0;
  bool degenerate = false;  // some error at or below the floor; slope not applicable
};

/// Ordinary least squares of log(error) on log(epsilon).
SlopeFit fit_slope(const std::vector<double>& epsilons, const std::vector<double>& errors, double floor = 1e-14);

struct ConvergenceReport {
  Scheme scheme = Scheme::MiniBatchFlow;
  ErrorMetric metric = ErrorMetric::Squared;
  std::size_t realizations = 0;
  std::uint64_t base_seed = 0;
  std::vector<ErrorCurve> curves;
  SlopeFit fit;

  std::vector<double> epsilons() const;
  /// sup_t of the mean error in the report's metric, one entry per epsilon.
  std::vector<double> sup_errors() const;
  std::vector<double> sup_std_errs() const;
};

/// One expectation_error run per epsilon (strictly decreasing, at least 3)
/// and a slope fit of the sup error in the chosen metric.
ConvergenceReport convergence_sweep(const MonteCarloModel& model, const std::vector<double>& epsilons,
                                    const MonteCarloOptions& opts, ErrorMetric metric = ErrorMetric::Squared,
                                    Scheme scheme = Scheme::MiniBatchFlow);

/// Model for a generic batch system: the reference is gradient_flow of the
/// full potential, the realization is mini_batch_flow or minimizing_movement.
MonteCarloModel make_model(const BatchSystem& sys, const Vec& u0, double horizon, Scheme scheme,
                           const FlowOptions& realization_opts = {}, const FlowOptions& reference_opts = {});

/// max_j pi_j^{-1/2} sqrt(t) (int_0^t Lambda(u(s)) ds)^{1/2} at every node of
/// the reference trajectory, with trapezoidal quadrature of Lambda o u.
std::vector<double> pathwise_bound(const BatchSystem& sys, const Trajectory& reference);

}  // namespace mbflow::flow
