#include "mbflow/problems/sparse.hpp"

#include <cmath>

#include "mbflow/convex/operators.hpp"
#include "mbflow/error.hpp"
#include "mbflow/flow/integrators.hpp"

namespace mbflow::problems {

using convex::CompositePotential;
using convex::L1Potential;
using convex::QuadraticPotential;

void SparseProblem::validate() const {
  if (a.rows() == 0 || a.cols() == 0) throw InvalidArgument("SparseProblem: A is empty");
  if (b.size() != a.rows()) throw InvalidArgument("SparseProblem: b must have one entry per row of A");
  if (!(lambda >= 0.0)) throw InvalidArgument("SparseProblem: lambda must be nonnegative");
  if (!(pi1 > 0.0) || !(pi2 > 0.0) || std::abs(pi1 + pi2 - 1.0) > 1e-12)
    throw InvalidArgument("SparseProblem: pi must be two positive numbers summing to 1");
}

SparseProblem example_sparse_problem() {
  SparseProblem p;
  p.a.resize(2, 2);
  p.a << 1.76, 0.4, 0.98, 2.24;
  p.b.resize(2);
  p.b << 1.87, -0.98;
  return p;
}

double sparse_objective(const SparseProblem& p, const Vec& u) {
  return 0.5 * (p.a * u - p.b).squaredNorm() + p.lambda * u.lpNorm<1>();
}

Vec sparse_residual_gradient(const SparseProblem& p, const Vec& u) { return p.a.transpose() * (p.a * u - p.b); }

namespace {

std::shared_ptr<QuadraticPotential> scaled_quadratic(const SparseProblem& p, double scale) {
  return std::make_shared<QuadraticPotential>(scale * p.a.transpose() * p.a, -scale * p.a.transpose() * p.b,
                                              0.5 * scale * p.b.squaredNorm());
}

std::shared_ptr<CompositePotential> full_potential(const SparseProblem& p) {
  return std::make_shared<CompositePotential>(scaled_quadratic(p, 1.0), p.lambda);
}

}  // namespace

Vec exact_mbd_segment(const SparseProblem& p, int branch, const Vec& v_start, double duration) {
  p.validate();
  if (duration < 0.0) throw InvalidArgument("exact_mbd_segment: negative duration");
  if (v_start.size() != p.dimension()) throw InvalidArgument("exact_mbd_segment: state has wrong dimension");
  if (branch == 1) return convex::exact_quadratic_flow(*scaled_quadratic(p, 1.0 / p.pi1), v_start, duration);
  if (branch == 2) return convex::soft_threshold(v_start, p.lambda * duration / p.pi2);
  throw InvalidArgument("exact_mbd_segment: branch must be 1 or 2");
}

flow::Trajectory sparse_flow_reference(const SparseProblem& p, const Vec& u0, const std::vector<double>& nodes,
                                       double h, SparseReferenceMode mode) {
  p.validate();
  if (!(h > 0.0)) throw InvalidArgument("sparse_flow_reference: step must be positive");
  if (u0.size() != p.dimension()) throw InvalidArgument("sparse_flow_reference: state has wrong dimension");
  if (nodes.empty() || nodes.front() != 0.0) throw InvalidArgument("sparse_flow_reference: nodes must start at 0");
  const Mat ata = p.a.transpose() * p.a;
  const Vec atb = p.a.transpose() * p.b;
  std::shared_ptr<CompositePotential> full;
  if (mode == SparseReferenceMode::ExplicitEuler) {
    const double norm = Eigen::SelfAdjointEigenSolver<Mat>(ata, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    if (h * norm >= 2.0) throw InvalidArgument("sparse_flow_reference: explicit step too large (h |A^T A| >= 2)");
    full = full_potential(p);
  }
  flow::Trajectory tr;
  tr.scheme = flow::Scheme::GradientFlow;
  tr.inner_step = h;
  Vec u = u0;
  double cur = 0.0;
  for (double t : nodes) {
    if (t > cur) {
      const auto n = static_cast<long>(std::max(1.0, std::ceil((t - cur) / h - 1e-9)));
      const double step = (t - cur) / static_cast<double>(n);
      for (long i = 0; i < n; ++i) {
        if (mode == SparseReferenceMode::ForwardBackward) {
          u = convex::soft_threshold(u - step * (ata * u - atb), step * p.lambda);
        } else {
          u -= step * full->min_norm_subgradient(u);
        }
      }
      cur = t;
    }
    tr.push(t, u);
  }
  return tr;
}

flow::Trajectory sparse_flow_reference(const SparseProblem& p, const Vec& u0, double horizon, double h,
                                       SparseReferenceMode mode) {
  return sparse_flow_reference(p, u0, flow::make_time_grid(horizon, 0.0), h, mode);
}

Vec lasso_kkt_residual(const SparseProblem& p, const Vec& u) {
  const Vec g = sparse_residual_gradient(p, u);
  Vec r(u.size());
  for (Index i = 0; i < u.size(); ++i) {
    if (u[i] > 0.0) {
      r[i] = std::abs(g[i] + p.lambda);
    } else if (u[i] < 0.0) {
      r[i] = std::abs(g[i] - p.lambda);
    } else {
      r[i] = std::max(0.0, std::abs(g[i]) - p.lambda);
    }
  }
  return r;
}

LassoSolution lasso_optimum(const SparseProblem& p, double tol, long max_sweeps) {
  p.validate();
  const Index d = p.dimension();
  const Vec col_sq = p.a.colwise().squaredNorm().transpose();
  if (p.lambda == 0.0) {
    Eigen::LLT<Mat> llt(p.a.transpose() * p.a);
    if (llt.info() != Eigen::Success || (col_sq.array() == 0.0).any())
      throw InvalidArgument("lasso_optimum: A^T A must be positive definite when lambda = 0");
  }
  LassoSolution sol;
  sol.u = Vec::Zero(d);
  Vec resid = p.b;  // b - A u
  for (sol.sweeps = 0; sol.sweeps < max_sweeps; ++sol.sweeps) {
    sol.kkt_residual = lasso_kkt_residual(p, sol.u);
    if (sol.max_residual() <= tol) return sol;
    for (Index i = 0; i < d; ++i) {
      if (col_sq[i] == 0.0) continue;  // coordinate does not enter the fit; stays 0
      const double z = p.a.col(i).dot(resid) + col_sq[i] * sol.u[i];
      const double ui = (z > p.lambda ? z - p.lambda : z < -p.lambda ? z + p.lambda : 0.0) / col_sq[i];
      if (ui != sol.u[i]) {
        resid -= (ui - sol.u[i]) * p.a.col(i);
        sol.u[i] = ui;
      }
    }
    // Refresh the residual now and then to keep the incremental update exact.
    if (sol.sweeps % 64 == 63) resid = p.b - p.a * sol.u;
  }
  sol.kkt_residual = lasso_kkt_residual(p, sol.u);
  if (sol.max_residual() <= tol) return sol;
  throw SolverError("lasso_optimum: coordinate descent did not reach the KKT tolerance");
}

double gamma_bound(const SparseProblem& p, const Vec& u) {
  const double d = static_cast<double>(p.dimension());
  return p.pi2 * p.pi2 / p.pi1 * sparse_residual_gradient(p, u).squaredNorm() +
         p.pi1 * p.pi1 / p.pi2 * (p.lambda * d) * (p.lambda * d);
}

flow::BatchSystem make_sparse_system(const SparseProblem& p) {
  p.validate();
  auto full = full_potential(p);
  flow::BatchSystemData data;
  data.sub_potentials = {scaled_quadratic(p, 1.0 / p.pi1),
                         std::make_shared<L1Potential>(p.dimension(), p.lambda / p.pi2)};
  data.weights = {p.pi1, p.pi2};
  data.batches = {{0}, {1}};
  data.batch_probs = {p.pi1, p.pi2};
  data.full = full;
  const double pi1 = p.pi1, pi2 = p.pi2;
  data.split = [full, pi1, pi2](const Vec& u) {
    const Vec g = full->smooth().gradient(u);
    const Vec eta = full->l1_selection(u);
    return flow::VarianceSplit{{g / pi1, eta / pi2}, g + eta};
  };
  return flow::BatchSystem(std::move(data));
}

flow::MonteCarloModel make_sparse_model(const SparseProblem& p, const Vec& u0, double horizon, double h_ref,
                                        flow::Scheme scheme) {
  flow::BatchSystem sys = make_sparse_system(p);
  flow::MonteCarloModel m = flow::make_model(sys, u0, horizon, scheme);
  m.reference = [p, u0, h_ref](const std::vector<double>& nodes) {
    return sparse_flow_reference(p, u0, nodes, h_ref).states;
  };
  return m;
}

}  // namespace mbflow::problems
