#pragma once

#include <memory>
#include <vector>

#include "mbflow/convex/polyhedron.hpp"
#include "mbflow/convex/potential.hpp"

namespace mbflow::convex {

struct AbsTerm {
  Index coord;
  double coef;    // >= 0
  double center;
};

struct SquareTerm {
  Index coord;
  double coef;    // >= 0; contributes coef * (u_coord - center)^2
  double center;
};

/// Coordinatewise piecewise quadratic
///   sum coef |u_k - center| + sum coef (u_k - center)^2 + linear . u.
/// Sums of such objectives stay in the family, which is what makes the
/// averaging identity of the constrained case checkable term by term.
class SeparableObjective {
 public:
  SeparableObjective() = default;
  SeparableObjective(Index dimension, std::vector<AbsTerm> abs_terms,
                     std::vector<SquareTerm> square_terms, Vec linear);

  Index dimension() const { return linear_.size(); }
  const std::vector<AbsTerm>& abs_terms() const { return abs_; }
  const std::vector<SquareTerm>& square_terms() const { return sq_; }
  const Vec& linear() const { return linear_; }

  double value(const Vec& u) const;

  /// Gradient of the square and linear terms only.
  Vec smooth_gradient(const Vec& u) const;

  /// Least-norm subgradient of the objective alone (no constraint).
  /// Coordinatewise: the subdifferential is an interval, pick its point of
  /// smallest magnitude.
  Vec min_norm_subgradient(const Vec& u, double kink_tol = 1e-12) const;

  /// Subgradient in which every abs term at a kink on coordinate k uses the
  /// slope coef * kink_theta_per_coord[k]; a NaN entry falls back to the
  /// clamp rule. Away from kinks the slope is coef * sign(u_k - center).
  Vec subgradient_with(const Vec& u, const std::vector<double>& kink_theta_per_coord,
                       double kink_tol = 1e-12) const;

  /// Scaled copy.
  SeparableObjective scaled(double factor) const;

  friend SeparableObjective operator+(const SeparableObjective& a, const SeparableObjective& b);

 private:
  std::vector<AbsTerm> abs_;
  std::vector<SquareTerm> sq_;
  Vec linear_;
};

/// Separable objective restricted to a polyhedron: Psi + indicator(C).
class ConstrainedSeparablePotential final : public Potential {
 public:
  ConstrainedSeparablePotential(SeparableObjective objective, std::shared_ptr<const Polyhedron> set,
                                double feasibility_tol = 1e-9);

  Index dimension() const override { return objective_.dimension(); }
  double value(const Vec& u) const override;
  Vec min_norm_subgradient(const Vec& u) const override;
  Vec prox(const Vec& x, double tau) const override;
  bool in_domain(const Vec& u, double tol) const override { return set_->contains(u, tol); }
  std::string name() const override { return "separable+indicator"; }

  /// Decomposition of the least-norm subgradient into an element of dPsi(u)
  /// and an element of the normal cone of C at u. `theta` records the slope
  /// selected at each coordinate with a kink (NaN elsewhere).
  struct Decomposition {
    Vec objective_part;
    Vec cone_part;
    std::vector<double> theta;
    Vec total() const { return objective_part + cone_part; }
  };
  Decomposition decompose(const Vec& u) const;

  /// Minimizer of Psi (plus an optional strongly convex proximal term
  /// |w - x|^2 / (2 tau)) over C by enumerating the smooth pieces cut out by
  /// the kinks and minimizing each piece with face enumeration.
  QuadraticMinimum minimize(const Vec* prox_center = nullptr, double tau = 0.0) const;

  const SeparableObjective& objective() const { return objective_; }
  const Polyhedron& set() const { return *set_; }
  std::shared_ptr<const Polyhedron> set_ptr() const { return set_; }

 private:
  SeparableObjective objective_;
  std::shared_ptr<const Polyhedron> set_;
  double tol_;
};

}  // namespace mbflow::convex
