#include "mbflow/problems/constrained_qp.hpp"

#include <algorithm>
#include <cmath>

#include "mbflow/error.hpp"
#include "mbflow/flow/integrators.hpp"

namespace mbflow::problems {

using convex::AbsTerm;
using convex::ConstrainedSeparablePotential;
using convex::SeparableObjective;
using convex::SquareTerm;

namespace {
constexpr double kFeasTol = 1e-10;
}

void ConstrainedProblem::validate() const {
  if (!set) throw InvalidArgument("ConstrainedProblem: no feasible set");
  if (set->dimension() != 2) throw InvalidArgument("ConstrainedProblem: the feasible set must live in R^2");
  double s = 0.0;
  for (double w : pi) {
    if (!(w > 0.0)) throw InvalidArgument("ConstrainedProblem: weights must be positive");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-12) throw InvalidArgument("ConstrainedProblem: weights must sum to 1");
  if (!std::isfinite(ud1) || !std::isfinite(yd)) throw InvalidArgument("ConstrainedProblem: targets must be finite");
}

std::shared_ptr<const convex::Polyhedron> example_feasible_set() {
  Mat a(5, 2);
  Vec b(5);
  a << 5, 3, 4, 6, 1, -2, -1, 0, 0, 1;
  b << 120, 150, 0, -7, 15;
  return std::make_shared<convex::Polyhedron>(a, b);
}

ConstrainedProblem example_qp_problem(double ud1, double yd) {
  ConstrainedProblem p;
  p.set = example_feasible_set();
  p.ud1 = ud1;
  p.yd = yd;
  return p;
}

SeparableObjective qp_objective(const ConstrainedProblem& p) {
  return SeparableObjective(2, {AbsTerm{0, 2.0, p.ud1}}, {SquareTerm{1, 3.0, p.yd}},
                            (Vec(2) << -2.0, -3.0).finished());
}

SeparableObjective qp_sub_objective(const ConstrainedProblem& p, int j) {
  switch (j) {
    case 1: return qp_objective(p);
    case 2: return SeparableObjective(2, {AbsTerm{0, 4.0, p.ud1}}, {}, (Vec(2) << -4.0, 0.0).finished());
    case 3: return SeparableObjective(2, {}, {SquareTerm{1, 6.0, p.yd}}, (Vec(2) << 0.0, -6.0).finished());
    default: throw InvalidArgument("qp_sub_objective: j must be 1, 2 or 3");
  }
}

Vec sub_potential_subgrad(const ConstrainedProblem& p, int j, const Vec& u) {
  return qp_sub_objective(p, j).min_norm_subgradient(u);
}

std::shared_ptr<ConstrainedSeparablePotential> qp_potential(const ConstrainedProblem& p) {
  p.validate();
  return std::make_shared<ConstrainedSeparablePotential>(qp_objective(p), p.set);
}

std::shared_ptr<ConstrainedSeparablePotential> qp_sub_potential(const ConstrainedProblem& p, int j) {
  p.validate();
  return std::make_shared<ConstrainedSeparablePotential>(qp_sub_objective(p, j), p.set);
}

Vec projected_euler_advance(const ConstrainedSeparablePotential& phi, const Vec& u, double duration, double h) {
  if (duration <= 0.0) return u;
  if (!(h > 0.0)) throw InvalidArgument("projected_euler_advance: step must be positive");
  const auto n = static_cast<long>(std::max(1.0, std::ceil(duration / h - 1e-9)));
  const double step = duration / static_cast<double>(n);
  Vec v = u;
  for (long i = 0; i < n; ++i) v = phi.set().project(v - step * phi.min_norm_subgradient(v));
  return v;
}

flow::Trajectory projected_euler_flow(const ConstrainedProblem& p, const Vec& u0, const std::vector<double>& nodes,
                                      double h) {
  const auto phi = qp_potential(p);
  if (u0.size() != 2 || !p.set->contains(u0, kFeasTol))
    throw InvalidArgument("projected_euler_flow: initial point is not in the feasible set");
  if (!(h > 0.0)) throw InvalidArgument("projected_euler_flow: step must be positive");
  if (nodes.empty() || nodes.front() != 0.0) throw InvalidArgument("projected_euler_flow: nodes must start at 0");
  flow::Trajectory tr;
  tr.scheme = flow::Scheme::GradientFlow;
  tr.inner_step = h;
  Vec u = u0;
  double cur = 0.0;
  for (double t : nodes) {
    u = projected_euler_advance(*phi, u, t - cur, h);
    cur = t;
    tr.push(t, u);
  }
  return tr;
}

flow::Trajectory projected_euler_flow(const ConstrainedProblem& p, const Vec& u0, double horizon, double h) {
  return projected_euler_flow(p, u0, flow::make_time_grid(horizon, 0.0), h);
}

flow::Trajectory mbd_projected_flow(const ConstrainedProblem& p, const flow::BatchSchedule& schedule,
                                    const Vec& u0, const std::vector<double>& nodes, double h) {
  p.validate();
  if (u0.size() != 2 || !p.set->contains(u0, kFeasTol))
    throw InvalidArgument("mbd_projected_flow: initial point is not in the feasible set");
  if (!(h > 0.0)) throw InvalidArgument("mbd_projected_flow: step must be positive");
  const std::array<std::shared_ptr<ConstrainedSeparablePotential>, 3> subs{
      qp_sub_potential(p, 1), qp_sub_potential(p, 2), qp_sub_potential(p, 3)};
  for (std::size_t j : schedule.indices)
    if (j >= 3) throw InvalidArgument("mbd_projected_flow: schedule refers to a batch other than 1..3");
  flow::Trajectory tr = flow::piecewise_flow(schedule, u0, nodes, [&](std::size_t j, const Vec& u, double dt, double) {
    return projected_euler_advance(*subs[j], u, dt, h);
  });
  tr.scheme = flow::Scheme::MiniBatchFlow;
  tr.inner_step = h;
  return tr;
}

QpOptimum qp_optimum(const ConstrainedSeparablePotential& phi, double tol, long max_iter) {
  const auto& set = phi.set();
  double curvature = 0.0;
  for (const auto& t : phi.objective().square_terms()) curvature = std::max(curvature, 2.0 * t.coef);
  const double alpha0 = 0.5 / std::max(1.0, curvature);

  QpOptimum out;
  Vec u = set.project(Vec::Zero(phi.dimension()));
  double val = phi.objective().value(u);
  double alpha = alpha0;
  long it = 0;
  for (; it < max_iter; ++it) {
    const Vec xi = phi.min_norm_subgradient(u);
    if (xi.norm() <= tol) break;
    const Vec cand = set.project(u - alpha * xi);
    const double step = (cand - u).norm();
    const double cval = phi.objective().value(cand);
    if (cval <= val - 1e-4 * xi.dot(u - cand)) {
      u = cand;
      val = cval;
      if (step <= tol) break;
      alpha = std::min(alpha0, 2.0 * alpha);
    } else {
      // The step overshot a kink or a face: shrink it.
      alpha *= 0.5;
      if (alpha * xi.norm() <= tol * 1e-3) break;
    }
  }
  if (it >= max_iter) throw SolverError("qp_optimum: projected descent hit the iteration cap");
  out.point = u;
  out.value = val;
  out.iterations = it;

  const auto en = phi.minimize();
  out.enumeration_point = en.point;
  out.enumeration_value = phi.objective().value(en.point);
  if (std::abs(out.enumeration_value - out.value) > 1e-6 * std::max(1.0, std::abs(out.value)))
    throw SolverError("qp_optimum: descent and face enumeration disagree on the optimal value");
  return out;
}

QpOptimum qp_optimum(const ConstrainedProblem& p, double tol, long max_iter) {
  return qp_optimum(*qp_potential(p), tol, max_iter);
}

namespace {

struct QpSplitParts {
  std::array<Vec, 3> grads;  // subgradients of Psi_j with shared kink slopes
  Vec full_objective;
  Vec cone;
};

QpSplitParts qp_split_parts(const ConstrainedSeparablePotential& full,
                            const std::array<SeparableObjective, 3>& subs, const Vec& u) {
  const auto d = full.decompose(u);
  QpSplitParts parts;
  for (std::size_t j = 0; j < 3; ++j) parts.grads[j] = subs[j].subgradient_with(u, d.theta);
  parts.full_objective = d.objective_part;
  parts.cone = d.cone_part;
  return parts;
}

}  // namespace

flow::BatchSystem make_qp_system(const ConstrainedProblem& p) {
  p.validate();
  auto full = qp_potential(p);
  const std::array<SeparableObjective, 3> subs{qp_sub_objective(p, 1), qp_sub_objective(p, 2), qp_sub_objective(p, 3)};
  flow::BatchSystemData data;
  for (int j = 1; j <= 3; ++j) data.sub_potentials.push_back(qp_sub_potential(p, j));
  data.weights = {p.pi[0], p.pi[1], p.pi[2]};
  data.batches = {{0}, {1}, {2}};
  data.batch_probs = data.weights;
  data.full = full;
  data.split = [full, subs](const Vec& u) {
    const auto parts = qp_split_parts(*full, subs, u);
    flow::VarianceSplit s;
    for (const auto& g : parts.grads) s.xi.push_back(g + parts.cone);
    s.full = parts.full_objective + parts.cone;
    return s;
  };
  return flow::BatchSystem(std::move(data));
}

double qp_gamma(const ConstrainedProblem& p, const Vec& u) {
  const auto full = qp_potential(p);
  const std::array<SeparableObjective, 3> subs{qp_sub_objective(p, 1), qp_sub_objective(p, 2), qp_sub_objective(p, 3)};
  const auto parts = qp_split_parts(*full, subs, u);
  double g = 0.0;
  for (std::size_t j = 0; j < 3; ++j) g += p.pi[j] * (parts.grads[j] - parts.full_objective).squaredNorm();
  return g;
}

flow::MonteCarloModel make_qp_model(const ConstrainedProblem& p, const Vec& u0, double horizon, double h_ref,
                                    double h_inner, flow::Scheme scheme) {
  p.validate();
  if (u0.size() != 2 || !p.set->contains(u0, 1e-10)) throw InvalidArgument("make_qp_model: u0 is not in C");
  flow::MonteCarloModel m;
  m.batch_probs = {p.pi[0], p.pi[1], p.pi[2]};
  m.horizon = horizon;
  m.reference = [p, u0, h_ref](const std::vector<double>& nodes) {
    return projected_euler_flow(p, u0, nodes, h_ref).states;
  };
  if (scheme == flow::Scheme::MiniBatchFlow) {
    m.realize = [p, u0, h_inner](const flow::BatchSchedule& s, const std::vector<double>& nodes) {
      const double h = h_inner > 0.0 ? h_inner : std::min(s.epsilon / 10.0, 1e-3);
      return mbd_projected_flow(p, s, u0, nodes, h).states;
    };
  } else if (scheme == flow::Scheme::MinimizingMovement) {
    const flow::BatchSystem sys = make_qp_system(p);
    m.realize = [sys, u0](const flow::BatchSchedule& s, const std::vector<double>& nodes) {
      return flow::minimizing_movement(sys, s, u0, nodes).states;
    };
  } else {
    throw InvalidArgument("make_qp_model: the randomized scheme must be mini-batch or minimizing-movement");
  }
  return m;
}

}  // namespace mbflow::problems
