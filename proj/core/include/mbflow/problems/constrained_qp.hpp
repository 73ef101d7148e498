#pragma once

#include <array>
#include <memory>
#include <vector>

#include "mbflow/convex/polyhedron.hpp"
#include "mbflow/convex/separable.hpp"
#include "mbflow/flow/batch_system.hpp"
#include "mbflow/flow/monte_carlo.hpp"
#include "mbflow/flow/schedule.hpp"
#include "mbflow/flow/trajectory.hpp"

namespace mbflow::problems {

/// Psi(u) = 2|u1 - ud| + 3(u2 - yd)^2 - 2 u1 - 3 u2 over a polyhedron C, split
/// into three sub-potentials with weights pi = (1/2, 1/4, 1/4):
///   Psi_1 = Psi, Psi_2 = 4|u1 - ud| - 4 u1, Psi_3 = 6(u2 - yd)^2 - 6 u2.
/// These carry no pi prefactor, so that sum_j pi_j Psi_j = Psi holds exactly.
struct ConstrainedProblem {
  std::shared_ptr<const convex::Polyhedron> set;
  double ud1 = 10.0;
  double yd = 10.0;
  std::array<double, 3> pi{0.5, 0.25, 0.25};

  void validate() const;
};

/// 5u1 + 3u2 <= 120, 4u1 + 6u2 <= 150, u1 - 2u2 <= 0, u1 >= 7, u2 <= 15.
std::shared_ptr<const convex::Polyhedron> example_feasible_set();
ConstrainedProblem example_qp_problem(double ud1 = 10.0, double yd = 10.0);

convex::SeparableObjective qp_objective(const ConstrainedProblem& p);
/// Psi_j for j = 1, 2, 3.
convex::SeparableObjective qp_sub_objective(const ConstrainedProblem& p, int j);

/// Least-norm subgradient of Psi_j (no constraint), j = 1, 2, 3.
Vec sub_potential_subgrad(const ConstrainedProblem& p, int j, const Vec& u);

/// Psi + indicator(C) and Psi_j + indicator(C).
std::shared_ptr<convex::ConstrainedSeparablePotential> qp_potential(const ConstrainedProblem& p);
std::shared_ptr<convex::ConstrainedSeparablePotential> qp_sub_potential(const ConstrainedProblem& p, int j);

/// ceil(duration / h) projected explicit Euler steps
///   u <- Proj_C(u - dt * dPhi(u)°)
/// with Phi = objective + indicator(C).
Vec projected_euler_advance(const convex::ConstrainedSeparablePotential& phi, const Vec& u, double duration,
                            double h);

/// Projected explicit Euler for the full potential, sampled at `nodes`.
/// Throws InvalidArgument when u0 is not in C (tolerance 1e-10).
flow::Trajectory projected_euler_flow(const ConstrainedProblem& p, const Vec& u0, const std::vector<double>& nodes,
                                      double h);
flow::Trajectory projected_euler_flow(const ConstrainedProblem& p, const Vec& u0, double horizon, double h);

/// Mini-batch version: on each segment the projected Euler steps use the
/// segment's sub-potential. Inner step h.
flow::Trajectory mbd_projected_flow(const ConstrainedProblem& p, const flow::BatchSchedule& schedule,
                                    const Vec& u0, const std::vector<double>& nodes, double h);

struct QpOptimum {
  Vec point;                // from projected subgradient descent
  double value = 0.0;
  Vec enumeration_point;    // from piecewise face enumeration
  double enumeration_value = 0.0;
  long iterations = 0;
};

/// Minimizer of objective + indicator(C) by projected least-norm subgradient
/// descent with diminishing steps, stopped when the step falls below tol;
/// cross-checked against face enumeration. Throws SolverError if the two
/// optimal values differ by more than 1e-6 (relative to max(1, |value|)) or
/// the descent hits the iteration cap. The minimizer need not be unique, so
/// only values are compared.
QpOptimum qp_optimum(const convex::ConstrainedSeparablePotential& phi, double tol = 1e-8, long max_iter = 2000000);
QpOptimum qp_optimum(const ConstrainedProblem& p, double tol = 1e-8, long max_iter = 2000000);

/// Three singleton batches over Psi_j + indicator(C). Split:
/// xi_j = (element of dPsi_j using the kink slopes chosen by dPhi(u)°) + eta*,
/// with eta* the normal-cone part of dPhi(u)°.
flow::BatchSystem make_qp_system(const ConstrainedProblem& p);

/// sum_j pi_j |grad Psi_j(u) - grad Psi(u)|^2 using the same kink slopes.
double qp_gamma(const ConstrainedProblem& p, const Vec& u);

/// Reference projected_euler_flow with step h_ref; realizations
/// mbd_projected_flow with inner step h_inner (<= 0 selects min(eps/10, 1e-3))
/// or the proximal scheme. Throws InvalidArgument when u0 is not in C.
flow::MonteCarloModel make_qp_model(const ConstrainedProblem& p, const Vec& u0, double horizon, double h_ref,
                                    double h_inner = 0.0, flow::Scheme scheme = flow::Scheme::MiniBatchFlow);

}  // namespace mbflow::problems
