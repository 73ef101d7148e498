#pragma once

#include <Eigen/Sparse>

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "mbflow/flow/monte_carlo.hpp"
#include "mbflow/types.hpp"

namespace mbflow::problems {

using SpMat = Eigen::SparseMatrix<double>;

/// N x N interior nodes of [-1, 1]^2 with spacing 2 / (N + 1) and zero
/// Dirichlet data. Node (row, col) sits at (x_col, y_row) and has flat index
/// row * N + col.
struct Grid2D {
  int n = 20;

  explicit Grid2D(int n_interior = 20);
  double spacing() const { return 2.0 / (n + 1); }
  /// Coordinate of interior index i (i = -1 and i = n are the boundary).
  double coord(int i) const { return -1.0 + (i + 1) * spacing(); }
  Index size() const { return static_cast<Index>(n) * n; }
  Index index(int row, int col) const { return static_cast<Index>(row) * n + col; }
  /// Grid function sampled from f(x, y).
  Vec sample(const std::function<double(double, double)>& f) const;
  /// Discrete L2 norm sqrt(h^2 sum u_i^2).
  double l2_norm(const Vec& u) const { return spacing() * u.norm(); }
};

/// Obstacle psi, source f, initial state u0 (grid functions), penalty
/// parameter delta, smooth-max width s and horizon T.
struct ObstacleSpec {
  Vec psi;
  Vec f;
  Vec u0;
  double delta = 1e-8;
  double smooth_width = 1e-10;
  double horizon = 0.5;

  void validate(const Grid2D& grid) const;
};

/// -4(x -+ 0.5)^2 - 4y^2 inside the discs where that expression exceeds -1
/// (0 at the centres, -1 on the rims), 0 elsewhere.
double two_disc_obstacle(double x, double y);
/// two_disc_obstacle with f = -1, u0 = 0, delta = 1e-8, s = 1e-10, T = 0.5.
ObstacleSpec example_obstacle_spec(const Grid2D& grid);

/// (x + sqrt(x^2 + s^2)) / 2, evaluated without cancellation for x < 0.
double smooth_max(double x, double s);
double smooth_max_derivative(double x, double s);
/// Antiderivative of smooth_max with G(0) = 0; unbounded below, like
/// -(s^2 / 4) log|x| as x -> -infinity.
double smooth_max_integral(double x, double s);

/// 0 left of -w, linear on [-w, w], 1 right of w.
double ramp(double x, double w);

/// chi_1 = (1-h(x))(1-h(y)), chi_2 = h(x)(1-h(y)), chi_3 = (1-h(x))h(y),
/// chi_4 = h(x)h(y): subdomain 1 is the lower-left quadrant, 2 lower-right,
/// 3 upper-left, 4 upper-right.
struct PartitionOfUnity {
  double halfwidth = 0.1;
  std::array<Vec, 4> chi;

  double weight(int i, double x, double y) const;
};

PartitionOfUnity build_partition(const Grid2D& grid, double ramp_halfwidth = 0.1);

using WeightFn = std::function<double(double x, double y)>;

/// Five-point discretization of div(chi grad u) with face coefficients equal
/// to the mean of chi at the two nodes of the face (chi evaluated at the
/// boundary position for boundary faces). Symmetric negative semidefinite.
SpMat weighted_laplacian(const Grid2D& grid, const WeightFn& chi);

/// Same with chi = sum_i coefs[i] chi_i.
SpMat weighted_laplacian(const Grid2D& grid, const PartitionOfUnity& part, const std::array<double, 4>& coefs);

struct NewtonOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
};

/// Batches over the four subdomains (0-based) and their probabilities. The
/// weight of batch B is chi_B = |B|^-1 sum_{i in B} chi_i / p_i with
/// p_i = sum_{j : i in B_j} pi_j / |B_j|, so that E[chi_B] = 1.
struct DdBatches {
  std::vector<std::vector<int>> batches{{0}, {1}, {2}, {3}};
  std::vector<double> probs{0.25, 0.25, 0.25, 0.25};
  /// Replace every batch operator by the full one (a system without variance).
  bool zero_variance = false;
};

/// Penalized parabolic obstacle problem
///   u_t = div(chi grad u) + chi f + (1/delta) max_s(psi - u, 0)
/// with implicit Euler steps solved by Newton's method. Immutable after
/// construction; steps may run concurrently.
class ObstacleModel {
 public:
  ObstacleModel(Grid2D grid, ObstacleSpec spec, double ramp_halfwidth = 0.1, DdBatches batches = {},
                NewtonOptions newton = {});

  const Grid2D& grid() const { return grid_; }
  const ObstacleSpec& spec() const { return spec_; }
  const PartitionOfUnity& partition() const { return part_; }
  const DdBatches& batches() const { return batches_; }
  const SpMat& full_operator() const { return full_op_; }
  const SpMat& batch_operator(std::size_t j) const { return batch_ops_.at(j); }
  const Vec& batch_source(std::size_t j) const { return batch_src_.at(j); }

  /// Solves (w - u)/h = L w + source + (1/delta) max_s(psi - w). Throws
  /// SolverError with the residual history when Newton fails. Convergence is
  /// measured on the residual scaled by the Jacobian diagonal.
  Vec implicit_step(const Vec& u, double h, const SpMat& op, const Vec& source) const;

  /// Reference step with the full operator.
  Vec penalized_step(const Vec& u, double h) const;
  /// Randomized step with batch j's operator and source.
  Vec dd_step(const Vec& u, std::size_t j, double epsilon) const;

  /// 1/2 <-L u, u> - <f, u> + (1/delta) sum G(psi - u) with G' = max_s.
  double energy(const Vec& u) const;

  /// u_0..u_K with K = ceil(T / h) reference steps.
  std::vector<Vec> reference_sequence(double h) const;

  /// Stationary discrete obstacle problem -L u = f, u >= psi, by projected
  /// Gauss-Seidel until the largest update is below tol.
  Vec stationary_solution(double tol = 1e-13, long max_sweeps = 1000000) const;

  /// Reference: implicit Euler sequence of the full potential with step
  /// h_ref, linearly interpolated between the times k h_ref (Interpolated), or
  /// embedded like the randomized scheme as u(t) = u_{k_t} (Embedded; with
  /// h_ref = epsilon this compares a zero-variance system with itself).
  /// Realizations: dd_step sequences embedded as w(t) = w_{k_t}. Distances use
  /// the discrete L2 norm.
  enum class ReferenceMode { Interpolated, Embedded };
  flow::MonteCarloModel monte_carlo_model(double h_ref, ReferenceMode mode = ReferenceMode::Interpolated) const;

 private:
  Grid2D grid_;
  ObstacleSpec spec_;
  PartitionOfUnity part_;
  DdBatches batches_;
  NewtonOptions newton_;
  SpMat full_op_;
  std::vector<SpMat> batch_ops_;
  std::vector<Vec> batch_src_;
};

/// Free-function forms of the two steps (assemble operators on every call).
Vec penalized_step(const Grid2D& grid, const ObstacleSpec& spec, const Vec& state, double h_time);
Vec dd_minimizing_step(const Grid2D& grid, const ObstacleSpec& spec, const PartitionOfUnity& part,
                       const DdBatches& batches, std::size_t j, const Vec& state, double epsilon);

struct DdExperimentOptions {
  std::size_t realizations = 8;
  std::uint64_t base_seed = 0;
  unsigned threads = 1;
  /// Reference step; <= 0 selects min(epsilon) / 16.
  double h_ref = 0.0;
  ObstacleModel::ReferenceMode reference_mode = ObstacleModel::ReferenceMode::Interpolated;
  double ramp_halfwidth = 0.1;
  DdBatches batches;
};

/// Convergence of the randomized domain decomposition scheme in the discrete
/// L2 norm (not squared) over the given decreasing epsilon list.
flow::ConvergenceReport run_dd_experiment(const ObstacleSpec& spec, const Grid2D& grid,
                                          const std::vector<double>& epsilons, const DdExperimentOptions& opts);

}  // namespace mbflow::problems
