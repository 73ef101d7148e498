#pragma once

#include <memory>
#include <vector>

#include "mbflow/convex/polyhedron.hpp"
#include "mbflow/convex/potential.hpp"

namespace mbflow::convex {

/// 1/2 u^T H u + c^T u + constant with H symmetric positive semidefinite.
///
/// The symmetric eigendecomposition of H is computed once at construction and
/// drives both the closed-form prox and the exact flow.
class QuadraticPotential final : public Potential {
 public:
  /// Throws InvalidArgument if H is not square, not symmetric within 1e-12
  /// (relative to max(1, |H|)), or has an eigenvalue below -1e-10.
  QuadraticPotential(Mat h, Vec c, double constant = 0.0);

  /// The linear potential a . u.
  static std::shared_ptr<QuadraticPotential> linear(const Vec& a);

  Index dimension() const override { return c_.size(); }
  double value(const Vec& u) const override;
  Vec gradient(const Vec& u) const { return h_ * u + c_; }
  Vec min_norm_subgradient(const Vec& u) const override { return gradient(u); }
  Vec prox(const Vec& x, double tau) const override;
  bool has_exact_flow() const override { return true; }
  Vec exact_flow(const Vec& u0, double t) const override;
  std::string name() const override { return "quadratic"; }

  const Mat& hessian() const { return h_; }
  const Vec& linear_term() const { return c_; }
  double constant() const { return constant_; }
  const Vec& eigenvalues() const { return evals_; }
  const Mat& eigenvectors() const { return evecs_; }

 private:
  Mat h_;
  Vec c_;
  double constant_;
  Vec evals_;
  Mat evecs_;
};

/// lambda * |u|_1 with lambda >= 0.
class L1Potential final : public Potential {
 public:
  L1Potential(Index dimension, double lambda);

  Index dimension() const override { return dim_; }
  double value(const Vec& u) const override;
  Vec min_norm_subgradient(const Vec& u) const override;
  Vec prox(const Vec& x, double tau) const override;
  bool has_exact_flow() const override { return true; }
  Vec exact_flow(const Vec& u0, double t) const override;
  std::string name() const override { return "l1"; }

  double lambda() const { return lambda_; }

 private:
  Index dim_;
  double lambda_;
};

struct IterationControl {
  double tolerance = 1e-12;
  int max_iterations = 100000;
};

/// Smooth quadratic plus lambda * |u|_1. The least-norm subgradient is the
/// closed-form clamp rule; the prox has no closed form and is computed by a
/// forward-backward fixed point iteration.
class CompositePotential final : public Potential {
 public:
  CompositePotential(std::shared_ptr<const QuadraticPotential> smooth, double lambda,
                     IterationControl control = {});

  Index dimension() const override { return smooth_->dimension(); }
  double value(const Vec& u) const override;
  Vec min_norm_subgradient(const Vec& u) const override;
  Vec prox(const Vec& x, double tau) const override;
  std::string name() const override { return "quadratic+l1"; }

  const QuadraticPotential& smooth() const { return *smooth_; }
  std::shared_ptr<const QuadraticPotential> smooth_ptr() const { return smooth_; }
  double lambda() const { return lambda_; }

  /// The element lambda*theta of lambda * d|u|_1 that pairs with the smooth
  /// gradient to give the least-norm subgradient.
  Vec l1_selection(const Vec& u) const;

 private:
  std::shared_ptr<const QuadraticPotential> smooth_;
  double lambda_;
  IterationControl control_;
  double lipschitz_;
};

/// Indicator of a polyhedron: 0 inside, +infinity outside.
class IndicatorPotential final : public Potential {
 public:
  explicit IndicatorPotential(std::shared_ptr<const Polyhedron> set);

  Index dimension() const override { return set_->dimension(); }
  double value(const Vec& u) const override;
  Vec min_norm_subgradient(const Vec& u) const override;
  Vec prox(const Vec& x, double) const override { return set_->project(x); }
  bool has_exact_flow() const override { return true; }
  Vec exact_flow(const Vec& u0, double) const override;
  bool in_domain(const Vec& u, double tol) const override { return set_->contains(u, tol); }
  std::string name() const override { return "indicator"; }

  const Polyhedron& set() const { return *set_; }

 private:
  std::shared_ptr<const Polyhedron> set_;
};

/// Weighted sum sum_i w_i Phi_i of arbitrary potentials, w_i >= 0.
///
/// The subgradient returned is sum_i w_i dPhi_i(u)°, which is the least-norm
/// element whenever at most one term is nonsmooth at u. The prox is computed by
/// consensus ADMM over the term proxes.
class SumPotential final : public Potential {
 public:
  SumPotential(std::vector<PotentialPtr> terms, std::vector<double> weights,
               IterationControl control = {});

  Index dimension() const override { return terms_.front()->dimension(); }
  double value(const Vec& u) const override;
  Vec min_norm_subgradient(const Vec& u) const override;
  Vec prox(const Vec& x, double tau) const override;
  bool in_domain(const Vec& u, double tol) const override;
  std::string name() const override { return "sum"; }

 private:
  std::vector<PotentialPtr> terms_;
  std::vector<double> weights_;
  IterationControl control_;
};

/// Weighted combination sum_i w_i Phi_i, folded into the most specific family
/// available: quadratics and linear terms merge into one quadratic, l1 terms
/// merge into one l1, a quadratic with an l1 becomes a composite, and a single
/// term with weight one is returned as is. Anything else becomes a
/// SumPotential.
PotentialPtr combine(const std::vector<PotentialPtr>& terms, const std::vector<double>& weights);

}  // namespace mbflow::convex
