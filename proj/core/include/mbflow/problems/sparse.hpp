#pragma once

#include <memory>
#include <vector>

#include "mbflow/convex/potentials.hpp"
#include "mbflow/flow/batch_system.hpp"
#include "mbflow/flow/monte_carlo.hpp"
#include "mbflow/flow/trajectory.hpp"

namespace mbflow::problems {

/// 1/2 |A u - b|^2 + lambda |u|_1, split into the quadratic batch
/// pi_1^-1 * 1/2 |A u - b|^2 and the l1 batch pi_2^-1 * lambda |u|_1.
struct SparseProblem {
  Mat a;
  Vec b;
  double lambda = 1.0;
  double pi1 = 0.5;
  double pi2 = 0.5;

  Index dimension() const { return a.cols(); }
  /// Throws InvalidArgument on inconsistent sizes, lambda < 0, or pi not a
  /// strictly positive pair summing to 1.
  void validate() const;
};

/// A = [[1.76, 0.4], [0.98, 2.24]], b = (1.87, -0.98), lambda = 1, pi = (1/2, 1/2).
SparseProblem example_sparse_problem();

double sparse_objective(const SparseProblem& p, const Vec& u);
/// A^T (A u - b).
Vec sparse_residual_gradient(const SparseProblem& p, const Vec& u);

/// Closed-form state after `duration` on one batch: branch 1 is the exact
/// quadratic flow of pi_1^-1 * 1/2 |A u - b|^2, branch 2 soft-thresholds by
/// lambda * duration / pi_2.
Vec exact_mbd_segment(const SparseProblem& p, int branch, const Vec& v_start, double duration);

enum class SparseReferenceMode {
  ForwardBackward,  // u <- soft_threshold(u - h A^T(Au - b), h lambda)
  ExplicitEuler,    // u <- u - h dPhi(u)°
};

/// Reference sparse inversion flow sampled at `nodes`; consecutive nodes are
/// joined by ceil(dt / h) equal steps. Explicit mode rejects h |A^T A| >= 2.
flow::Trajectory sparse_flow_reference(const SparseProblem& p, const Vec& u0, const std::vector<double>& nodes,
                                       double h, SparseReferenceMode mode = SparseReferenceMode::ForwardBackward);
flow::Trajectory sparse_flow_reference(const SparseProblem& p, const Vec& u0, double horizon, double h,
                                       SparseReferenceMode mode = SparseReferenceMode::ForwardBackward);

struct LassoSolution {
  Vec u;
  /// Per-coordinate distance of -[A^T(Au - b)]_i to lambda d|u_i|.
  Vec kkt_residual;
  long sweeps = 0;
  double max_residual() const { return kkt_residual.lpNorm<Eigen::Infinity>(); }
};

/// Cyclic coordinate descent until the KKT residual is <= tol.
LassoSolution lasso_optimum(const SparseProblem& p, double tol = 1e-10, long max_sweeps = 1000000);

/// Per-coordinate KKT residual of u.
Vec lasso_kkt_residual(const SparseProblem& p, const Vec& u);

/// (pi_2^2 / pi_1) |A^T(Au - b)|^2 + (pi_1^2 / pi_2) (lambda d)^2.
double gamma_bound(const SparseProblem& p, const Vec& u);

/// Two singleton batches over the two scaled sub-potentials. The split is
/// xi_1 = pi_1^-1 A^T(Au - b), xi_2 = pi_2^-1 eta*, where eta* is the l1 part
/// of the least-norm subgradient of the full potential.
flow::BatchSystem make_sparse_system(const SparseProblem& p);

/// Monte-Carlo model: reference from sparse_flow_reference with step h_ref,
/// realizations from exact segments (mini-batch) or proximal steps
/// (minimizing movement).
flow::MonteCarloModel make_sparse_model(const SparseProblem& p, const Vec& u0, double horizon, double h_ref,
                                        flow::Scheme scheme = flow::Scheme::MiniBatchFlow);

}  // namespace mbflow::problems
