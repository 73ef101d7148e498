#include "mbflow/flow/monte_carlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "mbflow/error.hpp"

namespace mbflow::flow {

namespace {

double euclid_sq(const Vec& a, const Vec& b) { return (a - b).squaredNorm(); }

std::vector<double> node_errors(const MonteCarloModel& model, const std::vector<Vec>& ref,
                                const std::vector<Vec>& sample) {
  if (sample.size() != ref.size()) throw Error("realization returned the wrong number of states");
  const auto& dist = model.distance_sq ? model.distance_sq : euclid_sq;
  std::vector<double> out(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) out[i] = dist(sample[i], ref[i]);
  return out;
}

[[noreturn]] void rethrow_with_context(const std::exception_ptr& ep, double epsilon, std::size_t r,
                                       std::uint64_t seed) {
  const std::string ctx = "epsilon=" + std::to_string(epsilon) + ", realization " + std::to_string(r) +
                          " (seed " + std::to_string(seed) + "): ";
  using Cause = RealizationError::Cause;
  try {
    std::rethrow_exception(ep);
  } catch (const SolverError& e) {
    throw RealizationError(ctx + e.what(), Cause::Solver, epsilon, r, seed, e.time());
  } catch (const InvalidArgument& e) {
    throw RealizationError(ctx + e.what(), Cause::InvalidArgument, epsilon, r, seed, std::nullopt);
  } catch (const std::exception& e) {
    throw RealizationError(ctx + e.what(), Cause::Other, epsilon, r, seed, std::nullopt);
  }
}

void mean_and_stderr(const std::vector<std::vector<double>>& samples, std::size_t node, double& mean,
                     double& std_err) {
  const auto r = static_cast<double>(samples.size());
  double sum = 0.0;
  for (const auto& s : samples) sum += s[node];
  mean = sum / r;
  double ss = 0.0;
  for (const auto& s : samples) ss += (s[node] - mean) * (s[node] - mean);
  std_err = samples.size() > 1 ? std::sqrt(ss / (r - 1.0) / r) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::vector<double> realization_error(const MonteCarloModel& model, double epsilon, std::uint64_t seed,
                                      std::vector<double>* times) {
  const auto nodes = make_time_grid(model.horizon, epsilon, model.uniform_nodes);
  const auto ref = model.reference(nodes);
  const auto schedule = draw_schedule(model.batch_probs, epsilon, model.horizon, seed);
  if (times) *times = nodes;
  try {
    return node_errors(model, ref, model.realize(schedule, nodes));
  } catch (...) {
    rethrow_with_context(std::current_exception(), epsilon, 0, seed);
  }
}

ErrorCurve expectation_error(const MonteCarloModel& model, double epsilon, const MonteCarloOptions& opts) {
  if (opts.realizations < 2) throw InvalidArgument("expectation_error: need at least 2 realizations");
  if (!model.reference || !model.realize) throw InvalidArgument("expectation_error: incomplete model");
  const auto nodes = make_time_grid(model.horizon, epsilon, model.uniform_nodes);
  const auto ref = model.reference(nodes);
  if (ref.size() != nodes.size()) throw Error("reference returned the wrong number of states");

  const std::size_t r_total = opts.realizations;
  std::vector<std::vector<double>> sq(r_total);
  std::vector<std::exception_ptr> failures(r_total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < r_total; r = next++) {
      try {
        const auto schedule = draw_schedule(model.batch_probs, epsilon, model.horizon, opts.base_seed + r);
        sq[r] = node_errors(model, ref, model.realize(schedule, nodes));
      } catch (...) {
        failures[r] = std::current_exception();
      }
    }
  };
  unsigned threads = opts.threads == 0 ? std::max(1U, std::thread::hardware_concurrency()) : opts.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, r_total));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t r = 0; r < r_total; ++r)
    if (failures[r]) rethrow_with_context(failures[r], epsilon, r, opts.base_seed + r);

  std::vector<std::vector<double>> norms(r_total);
  for (std::size_t r = 0; r < r_total; ++r) {
    norms[r].resize(sq[r].size());
    std::transform(sq[r].begin(), sq[r].end(), norms[r].begin(), [](double x) { return std::sqrt(x); });
  }

  ErrorCurve c;
  c.epsilon = epsilon;
  c.realizations = r_total;
  c.base_seed = opts.base_seed;
  c.times = nodes;
  const std::size_t n = nodes.size();
  c.mean_sq.resize(n);
  c.std_err_sq.resize(n);
  c.mean_norm.resize(n);
  c.std_err_norm.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    mean_and_stderr(sq, i, c.mean_sq[i], c.std_err_sq[i]);
    mean_and_stderr(norms, i, c.mean_norm[i], c.std_err_norm[i]);
  }
  const auto isq = static_cast<std::size_t>(std::max_element(c.mean_sq.begin(), c.mean_sq.end()) - c.mean_sq.begin());
  const auto inorm =
      static_cast<std::size_t>(std::max_element(c.mean_norm.begin(), c.mean_norm.end()) - c.mean_norm.begin());
  c.sup_mse = c.mean_sq[isq];
  c.sup_mse_std_err = c.std_err_sq[isq];
  c.sup_norm = c.mean_norm[inorm];
  c.sup_norm_std_err = c.std_err_norm[inorm];
  return c;
}

SlopeFit fit_slope(const std::vector<double>& epsilons, const std::vector<double>& errors, double floor) {
  if (epsilons.size() != errors.size() || epsilons.size() < 2)
    throw InvalidArgument("fit_slope: need at least two (epsilon, error) pairs");
  SlopeFit fit;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (std::any_of(errors.begin(), errors.end(), [&](double e) { return !(e > floor); })) {
    fit.degenerate = true;
    fit.slope = fit.std_err = fit.intercept = nan;
    return fit;
  }
  const auto n = static_cast<double>(epsilons.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    mx += std::log(epsilons[i]);
    my += std::log(errors[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    const double dx = std::log(epsilons[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(errors[i]) - my);
  }
  if (sxx <= 0.0) throw InvalidArgument("fit_slope: epsilons must not all coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    const double res = std::log(errors[i]) - fit.intercept - fit.slope * std::log(epsilons[i]);
    ssr += res * res;
  }
  fit.std_err = epsilons.size() > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : nan;
  return fit;
}

std::vector<double> ConvergenceReport::epsilons() const {
  std::vector<double> out;
  for (const auto& c : curves) out.push_back(c.epsilon);
  return out;
}

std::vector<double> ConvergenceReport::sup_errors() const {
  std::vector<double> out;
  for (const auto& c : curves) out.push_back(metric == ErrorMetric::Squared ? c.sup_mse : c.sup_norm);
  return out;
}

std::vector<double> ConvergenceReport::sup_std_errs() const {
  std::vector<double> out;
  for (const auto& c : curves) out.push_back(metric == ErrorMetric::Squared ? c.sup_mse_std_err : c.sup_norm_std_err);
  return out;
}

ConvergenceReport convergence_sweep(const MonteCarloModel& model, const std::vector<double>& epsilons,
                                    const MonteCarloOptions& opts, ErrorMetric metric, Scheme scheme) {
  if (epsilons.size() < 3) throw InvalidArgument("convergence_sweep: need at least 3 epsilon values");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) throw InvalidArgument("convergence_sweep: epsilon values must be positive");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1]))
      throw InvalidArgument("convergence_sweep: epsilon values must decrease strictly");
  }
  ConvergenceReport rep;
  rep.scheme = scheme;
  rep.metric = metric;
  rep.realizations = opts.realizations;
  rep.base_seed = opts.base_seed;
  for (double eps : epsilons) rep.curves.push_back(expectation_error(model, eps, opts));
  rep.fit = fit_slope(rep.epsilons(), rep.sup_errors());
  return rep;
}

MonteCarloModel make_model(const BatchSystem& sys, const Vec& u0, double horizon, Scheme scheme,
                           const FlowOptions& realization_opts, const FlowOptions& reference_opts) {
  if (scheme == Scheme::GradientFlow) throw InvalidArgument("make_model: the randomized scheme must be mini-batch or minimizing-movement");
  MonteCarloModel m;
  m.batch_probs = sys.batch_probs();
  m.horizon = horizon;
  m.reference = [sys, u0, reference_opts](const std::vector<double>& nodes) {
    return gradient_flow(sys.full(), u0, nodes, reference_opts).states;
  };
  if (scheme == Scheme::MiniBatchFlow) {
    m.realize = [sys, u0, realization_opts](const BatchSchedule& s, const std::vector<double>& nodes) {
      return mini_batch_flow(sys, s, u0, nodes, realization_opts).states;
    };
  } else {
    m.realize = [sys, u0](const BatchSchedule& s, const std::vector<double>& nodes) {
      return minimizing_movement(sys, s, u0, nodes).states;
    };
  }
  return m;
}

std::vector<double> pathwise_bound(const BatchSystem& sys, const Trajectory& reference) {
  double gamma = 0.0;
  for (double p : sys.batch_probs()) gamma = std::max(gamma, 1.0 / std::sqrt(p));
  std::vector<double> out(reference.size(), 0.0);
  double integral = 0.0;
  double prev = variance_lambda(sys, reference.states.front());
  for (std::size_t i = 1; i < reference.size(); ++i) {
    const double cur = variance_lambda(sys, reference.states[i]);
    integral += 0.5 * (prev + cur) * (reference.times[i] - reference.times[i - 1]);
    prev = cur;
    out[i] = gamma * std::sqrt(reference.times[i] * integral);
  }
  return out;
}

}  // namespace mbflow::flow
