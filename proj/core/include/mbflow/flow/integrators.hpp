#pragma once

#include <functional>
#include <vector>

#include "mbflow/convex/potential.hpp"
#include "mbflow/flow/batch_system.hpp"
#include "mbflow/flow/schedule.hpp"
#include "mbflow/flow/trajectory.hpp"

namespace mbflow::flow {

enum class InnerIntegrator {
  ProximalEuler,  // backward Euler: u <- prox_{h Phi}(u)
  ExplicitEuler,  // u <- u - h dPhi(u)°
};

struct FlowOptions {
  /// Inner step for potentials without an exact evolver. Values <= 0 select
  /// the default: min(epsilon / 10, 1e-3) for mini-batch segments and 1e-3
  /// for the full flow.
  double inner_step = 0.0;
  InnerIntegrator integrator = InnerIntegrator::ProximalEuler;
  /// Use the potential's closed-form flow when it has one.
  bool use_exact = true;
};

/// Resolved inner step for segments of length epsilon (epsilon <= 0 means
/// no segmentation).
double resolve_inner_step(const FlowOptions& opts, double epsilon);

/// Evolves u along the flow of phi for `duration`, using the exact evolver
/// when allowed, else ceil(duration / h) equal substeps. `t0` only labels
/// errors.
Vec evolve(const convex::Potential& phi, const Vec& u, double duration, double h, const FlowOptions& opts,
           double t0 = 0.0);

/// Reference solution of u' in -dPhi(u) sampled at `nodes` (nodes[0] = 0).
Trajectory gradient_flow(const convex::Potential& phi, const Vec& u0, const std::vector<double>& nodes,
                         const FlowOptions& opts = {});

/// Same on the default uniform 201-node grid of [0, T].
Trajectory gradient_flow(const convex::Potential& phi, const Vec& u0, double horizon,
                         const FlowOptions& opts = {});

/// Advances a state under batch `batch` for `duration`, starting at time t0.
using SegmentAdvance = std::function<Vec(std::size_t batch, const Vec& u, double duration, double t0)>;

/// Continuous concatenation of per-segment evolutions sampled at `nodes`: the
/// state follows batch j_k on [t_{k-1}, t_k] and each segment starts where the
/// previous one ended. Nodes within 1e-9 epsilon past a switching time are
/// still assigned to the earlier segment.
Trajectory piecewise_flow(const BatchSchedule& schedule, const Vec& u0, const std::vector<double>& nodes,
                          const SegmentAdvance& advance);

/// Mini-batch descent flow: on [t_{k-1}, t_k) the state follows the flow of
/// the batch potential Phi_{B_{j_k}}; the end state of one segment starts the
/// next. Nodes must lie in [0, schedule.horizon].
Trajectory mini_batch_flow(const BatchSystem& sys, const BatchSchedule& schedule, const Vec& u0,
                           const std::vector<double>& nodes, const FlowOptions& opts = {});

/// Mini-batch minimizing movement: w_k = prox_{epsilon Phi_{B_{j_k}}}(w_{k-1})
/// and w_eps(t) = w_k on [t_{k-1}, t_k). A node at the horizon that falls on
/// a switching time takes the left limit w_K.
Trajectory minimizing_movement(const BatchSystem& sys, const BatchSchedule& schedule, const Vec& u0,
                               const std::vector<double>& nodes);

/// The proximal sequence w_0..w_K itself.
std::vector<Vec> proximal_sequence(const BatchSystem& sys, const BatchSchedule& schedule, const Vec& u0);

/// Index k with t in [t_{k-1}, t_k), clamped to [1, K]. Times within 1e-9
/// epsilon of a switching time count as that switching time.
std::size_t segment_index(const BatchSchedule& schedule, double t);

}  // namespace mbflow::flow
