#include "mbflow/flow/integrators.hpp"

#include <algorithm>
#include <cmath>

#include "mbflow/error.hpp"

namespace mbflow::flow {

namespace {

void check_nodes(const std::vector<double>& nodes, double horizon) {
  if (nodes.empty() || nodes.front() != 0.0) throw InvalidArgument("time nodes must start at 0");
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (!(nodes[i] > nodes[i - 1])) throw InvalidArgument("time nodes must increase strictly");
  if (horizon > 0.0 && nodes.back() > horizon * (1.0 + 1e-12)) throw InvalidArgument("time nodes exceed the horizon");
}

void check_start(const BatchSystem& sys, const Vec& u0) {
  if (u0.size() != sys.dimension()) throw InvalidArgument("initial state has wrong dimension");
  for (std::size_t j = 0; j < sys.num_batches(); ++j)
    if (!sys.batch(j).in_domain(u0, 1e-9))
      throw InvalidArgument("initial state is outside the domain of batch potential " + std::to_string(j + 1));
}

}  // namespace

double resolve_inner_step(const FlowOptions& opts, double epsilon) {
  if (opts.inner_step > 0.0) return opts.inner_step;
  return epsilon > 0.0 ? std::min(epsilon / 10.0, 1e-3) : 1e-3;
}

Vec evolve(const convex::Potential& phi, const Vec& u, double duration, double h, const FlowOptions& opts,
           double t0) {
  if (duration <= 0.0) return u;
  if (opts.use_exact && phi.has_exact_flow()) return phi.exact_flow(u, duration);
  if (!(h > 0.0)) throw InvalidArgument("evolve: inner step must be positive");
  const auto n = static_cast<long>(std::max(1.0, std::ceil(duration / h - 1e-9)));
  const double step = duration / static_cast<double>(n);
  Vec v = u;
  for (long i = 0; i < n; ++i) {
    try {
      if (opts.integrator == InnerIntegrator::ProximalEuler) {
        v = phi.prox(v, step);
      } else {
        v -= step * phi.min_norm_subgradient(v);
      }
    } catch (const SolverError& e) {
      throw SolverError(std::string("inner step failed: ") + e.what(), t0 + static_cast<double>(i) * step);
    }
    if (!v.allFinite()) throw SolverError("inner step produced a non-finite state", t0 + static_cast<double>(i + 1) * step);
  }
  return v;
}

Trajectory gradient_flow(const convex::Potential& phi, const Vec& u0, const std::vector<double>& nodes,
                         const FlowOptions& opts) {
  check_nodes(nodes, 0.0);
  if (u0.size() != phi.dimension()) throw InvalidArgument("gradient_flow: initial state has wrong dimension");
  if (!phi.in_domain(u0, 1e-9)) throw InvalidArgument("gradient_flow: initial state is outside the domain");
  const double h = resolve_inner_step(opts, 0.0);
  Trajectory tr;
  tr.scheme = Scheme::GradientFlow;
  tr.inner_step = (opts.use_exact && phi.has_exact_flow()) ? 0.0 : h;
  const bool exact = opts.use_exact && phi.has_exact_flow();
  Vec v = u0;
  double cur = 0.0;
  for (double t : nodes) {
    // Exact evolvers are evaluated from u0 directly to avoid accumulating roundoff.
    v = exact ? phi.exact_flow(u0, t) : evolve(phi, v, t - cur, h, opts, cur);
    cur = t;
    tr.push(t, v);
  }
  return tr;
}

Trajectory gradient_flow(const convex::Potential& phi, const Vec& u0, double horizon, const FlowOptions& opts) {
  return gradient_flow(phi, u0, make_time_grid(horizon, 0.0), opts);
}

std::size_t segment_index(const BatchSchedule& schedule, double t) {
  const double x = t / schedule.epsilon;
  auto k = static_cast<std::size_t>(std::max(0.0, std::floor(x + 1e-9))) + 1;
  return std::clamp<std::size_t>(k, 1, schedule.size());
}

Trajectory piecewise_flow(const BatchSchedule& schedule, const Vec& u0, const std::vector<double>& nodes,
                          const SegmentAdvance& advance) {
  check_nodes(nodes, schedule.horizon);
  const double tol = 1e-9 * schedule.epsilon;
  Trajectory tr;
  tr.epsilon = schedule.epsilon;
  tr.seed = schedule.seed;
  Vec v = u0;
  double cur = 0.0;
  std::size_t k = 1;
  const std::size_t k_total = schedule.size();
  for (double t : nodes) {
    while (k < k_total && t > schedule.switch_time(k) + tol) {
      const double tk = schedule.switch_time(k);
      v = advance(schedule.batch(k), v, tk - cur, cur);
      cur = tk;
      ++k;
    }
    if (t > cur) {
      v = advance(schedule.batch(k), v, t - cur, cur);
      cur = t;
    }
    tr.push(t, v);
  }
  return tr;
}

Trajectory mini_batch_flow(const BatchSystem& sys, const BatchSchedule& schedule, const Vec& u0,
                           const std::vector<double>& nodes, const FlowOptions& opts) {
  check_start(sys, u0);
  const double h = resolve_inner_step(opts, schedule.epsilon);
  Trajectory tr = piecewise_flow(schedule, u0, nodes, [&](std::size_t j, const Vec& u, double dt, double t0) {
    return evolve(sys.batch(j), u, dt, h, opts, t0);
  });
  tr.scheme = Scheme::MiniBatchFlow;
  tr.inner_step = h;
  return tr;
}

std::vector<Vec> proximal_sequence(const BatchSystem& sys, const BatchSchedule& schedule, const Vec& u0) {
  check_start(sys, u0);
  std::vector<Vec> w{u0};
  w.reserve(schedule.size() + 1);
  for (std::size_t k = 1; k <= schedule.size(); ++k) {
    try {
      w.push_back(sys.batch(schedule.batch(k)).prox(w.back(), schedule.epsilon));
    } catch (const SolverError& e) {
      throw SolverError(std::string("proximal step failed: ") + e.what(), schedule.switch_time(k));
    }
  }
  return w;
}

Trajectory minimizing_movement(const BatchSystem& sys, const BatchSchedule& schedule, const Vec& u0,
                               const std::vector<double>& nodes) {
  check_nodes(nodes, schedule.horizon);
  const std::vector<Vec> w = proximal_sequence(sys, schedule, u0);
  Trajectory tr;
  tr.scheme = Scheme::MinimizingMovement;
  tr.epsilon = schedule.epsilon;
  tr.inner_step = schedule.epsilon;
  tr.seed = schedule.seed;
  for (double t : nodes) tr.push(t, w[segment_index(schedule, t)]);
  return tr;
}

}  // namespace mbflow::flow
