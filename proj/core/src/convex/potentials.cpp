#include "mbflow/convex/potentials.hpp"

#include <cmath>
#include <limits>

#include "mbflow/convex/operators.hpp"
#include "mbflow/error.hpp"

namespace mbflow::convex {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Vec Potential::exact_flow(const Vec&, double) const {
  throw Unsupported("potential '" + name() + "' has no exact flow");
}

bool Potential::in_domain(const Vec& u, double) const { return std::isfinite(value(u)); }

// ---------------------------------------------------------------------------

QuadraticPotential::QuadraticPotential(Mat h, Vec c, double constant)
    : h_(std::move(h)), c_(std::move(c)), constant_(constant) {
  if (h_.rows() != h_.cols() || h_.rows() != c_.size())
    throw InvalidArgument("QuadraticPotential: H must be square and match c");
  const double scale = std::max(1.0, h_.cwiseAbs().maxCoeff());
  if (h_.size() > 0 && (h_ - h_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidArgument("QuadraticPotential: H is not symmetric");
  h_ = 0.5 * (h_ + h_.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(h_);
  if (eig.info() != Eigen::Success) throw SolverError("QuadraticPotential: eigendecomposition failed");
  evals_ = eig.eigenvalues();
  evecs_ = eig.eigenvectors();
  if (evals_.size() > 0 && evals_.minCoeff() < -1e-10 * scale)
    throw InvalidArgument("QuadraticPotential: H is not positive semidefinite");
}

std::shared_ptr<QuadraticPotential> QuadraticPotential::linear(const Vec& a) {
  return std::make_shared<QuadraticPotential>(Mat::Zero(a.size(), a.size()), a, 0.0);
}

double QuadraticPotential::value(const Vec& u) const {
  return 0.5 * u.dot(h_ * u) + c_.dot(u) + constant_;
}

Vec QuadraticPotential::prox(const Vec& x, double tau) const {
  const Vec z = evecs_.transpose() * (x - tau * c_);
  Vec scaled(z.size());
  for (Index k = 0; k < z.size(); ++k) scaled[k] = z[k] / (1.0 + tau * evals_[k]);
  return evecs_ * scaled;
}

Vec QuadraticPotential::exact_flow(const Vec& u0, double t) const {
  return exact_quadratic_flow(*this, u0, t);
}

// ---------------------------------------------------------------------------

L1Potential::L1Potential(Index dimension, double lambda) : dim_(dimension), lambda_(lambda) {
  if (!(lambda >= 0.0)) throw InvalidArgument("L1Potential: lambda must be nonnegative");
}

double L1Potential::value(const Vec& u) const { return lambda_ * u.lpNorm<1>(); }

Vec L1Potential::min_norm_subgradient(const Vec& u) const {
  Vec g(u.size());
  for (Index i = 0; i < u.size(); ++i) g[i] = u[i] > 0 ? lambda_ : (u[i] < 0 ? -lambda_ : 0.0);
  return g;
}

Vec L1Potential::prox(const Vec& x, double tau) const { return soft_threshold(x, tau * lambda_); }

Vec L1Potential::exact_flow(const Vec& u0, double t) const { return soft_threshold(u0, lambda_ * t); }

// ---------------------------------------------------------------------------

CompositePotential::CompositePotential(std::shared_ptr<const QuadraticPotential> smooth, double lambda,
                                       IterationControl control)
    : smooth_(std::move(smooth)), lambda_(lambda), control_(control) {
  if (!smooth_) throw InvalidArgument("CompositePotential: null smooth part");
  if (!(lambda >= 0.0)) throw InvalidArgument("CompositePotential: lambda must be nonnegative");
  lipschitz_ = smooth_->eigenvalues().size() ? std::max(0.0, smooth_->eigenvalues().maxCoeff()) : 0.0;
}

double CompositePotential::value(const Vec& u) const {
  return smooth_->value(u) + lambda_ * u.lpNorm<1>();
}

Vec CompositePotential::l1_selection(const Vec& u) const {
  const Vec g = smooth_->gradient(u);
  Vec eta(u.size());
  for (Index i = 0; i < u.size(); ++i) {
    if (u[i] > 0) {
      eta[i] = lambda_;
    } else if (u[i] < 0) {
      eta[i] = -lambda_;
    } else {
      // theta = clamp(-g/lambda, -1, 1) minimizes |g + lambda theta|.
      eta[i] = shrink(g[i], lambda_) - g[i];
    }
  }
  return eta;
}

Vec CompositePotential::min_norm_subgradient(const Vec& u) const {
  return smooth_->gradient(u) + l1_selection(u);
}

Vec CompositePotential::prox(const Vec& x, double tau) const {
  // Forward-backward on f(w) = q(w) + |w - x|^2 / (2 tau), g = lambda |w|_1.
  const double step = 1.0 / (lipschitz_ + 1.0 / tau);
  auto grad_f = [&](const Vec& w) -> Vec { return smooth_->gradient(w) + (w - x) / tau; };
  Vec w = soft_threshold(x - tau * smooth_->gradient(x), tau * lambda_);
  for (int it = 0; it < control_.max_iterations; ++it) {
    Vec next = soft_threshold(w - step * grad_f(w), step * lambda_);
    const double delta = (next - w).lpNorm<Eigen::Infinity>();
    w = std::move(next);
    if (delta <= control_.tolerance * (1.0 + w.lpNorm<Eigen::Infinity>())) return w;
  }
  throw SolverError("CompositePotential::prox: no convergence within iteration cap");
}

// ---------------------------------------------------------------------------

IndicatorPotential::IndicatorPotential(std::shared_ptr<const Polyhedron> set) : set_(std::move(set)) {
  if (!set_) throw InvalidArgument("IndicatorPotential: null set");
}

double IndicatorPotential::value(const Vec& u) const { return set_->contains(u) ? 0.0 : kInf; }

Vec IndicatorPotential::min_norm_subgradient(const Vec& u) const {
  if (!set_->contains(u, 1e-9)) throw InvalidArgument("IndicatorPotential: point outside the set");
  return Vec::Zero(u.size());
}

Vec IndicatorPotential::exact_flow(const Vec& u0, double) const {
  if (!set_->contains(u0, 1e-9)) throw InvalidArgument("IndicatorPotential: flow started outside the set");
  return u0;
}

// ---------------------------------------------------------------------------

SumPotential::SumPotential(std::vector<PotentialPtr> terms, std::vector<double> weights,
                           IterationControl control)
    : terms_(std::move(terms)), weights_(std::move(weights)), control_(control) {
  if (terms_.empty() || terms_.size() != weights_.size())
    throw InvalidArgument("SumPotential: need one weight per term");
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!terms_[i]) throw InvalidArgument("SumPotential: null term");
    if (terms_[i]->dimension() != terms_[0]->dimension())
      throw InvalidArgument("SumPotential: terms disagree on dimension");
    if (!(weights_[i] >= 0.0)) throw InvalidArgument("SumPotential: weights must be nonnegative");
  }
}

double SumPotential::value(const Vec& u) const {
  double v = 0.0;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (weights_[i] == 0.0) continue;
    v += weights_[i] * terms_[i]->value(u);
  }
  return v;
}

bool SumPotential::in_domain(const Vec& u, double tol) const {
  for (std::size_t i = 0; i < terms_.size(); ++i)
    if (weights_[i] > 0.0 && !terms_[i]->in_domain(u, tol)) return false;
  return true;
}

Vec SumPotential::min_norm_subgradient(const Vec& u) const {
  Vec g = Vec::Zero(u.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (weights_[i] == 0.0) continue;
    g += weights_[i] * terms_[i]->min_norm_subgradient(u);
  }
  return g;
}

Vec SumPotential::prox(const Vec& x, double tau) const {
  // Consensus ADMM. Copy i minimizes w_i Phi_i(w) + |w - x|^2 / (2 tau K);
  // the proximal quadratic is shared evenly across the K copies.
  const auto k = static_cast<double>(terms_.size());
  const double a = 1.0 / (tau * k);
  const double rho = a;
  std::vector<Vec> w(terms_.size(), x), y(terms_.size(), Vec::Zero(x.size()));
  Vec z = x;
  for (int it = 0; it < control_.max_iterations; ++it) {
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      const Vec center = (a * x + rho * (z - y[i])) / (a + rho);
      w[i] = weights_[i] > 0.0 ? terms_[i]->prox(center, weights_[i] / (a + rho)) : center;
    }
    Vec z_next = Vec::Zero(x.size());
    for (std::size_t i = 0; i < terms_.size(); ++i) z_next += w[i] + y[i];
    z_next /= k;
    double primal = 0.0;
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      y[i] += w[i] - z_next;
      primal = std::max(primal, (w[i] - z_next).lpNorm<Eigen::Infinity>());
    }
    const double dual = (z_next - z).lpNorm<Eigen::Infinity>();
    z = std::move(z_next);
    const double tol = control_.tolerance * (1.0 + z.lpNorm<Eigen::Infinity>());
    if (primal <= tol && dual <= tol) return z;
  }
  throw SolverError("SumPotential::prox: ADMM did not converge within iteration cap");
}

// ---------------------------------------------------------------------------

PotentialPtr combine(const std::vector<PotentialPtr>& terms, const std::vector<double>& weights) {
  if (terms.empty() || terms.size() != weights.size())
    throw InvalidArgument("combine: need one weight per term");
  if (terms.size() == 1 && weights[0] == 1.0) return terms[0];

  const Index d = terms[0]->dimension();
  Mat h = Mat::Zero(d, d);
  Vec c = Vec::Zero(d);
  double constant = 0.0;
  double lambda = 0.0;
  bool any_quadratic = false;
  bool any_l1 = false;
  bool foldable = true;
  for (std::size_t i = 0; i < terms.size() && foldable; ++i) {
    const double w = weights[i];
    if (terms[i]->dimension() != d) throw InvalidArgument("combine: terms disagree on dimension");
    if (const auto* q = dynamic_cast<const QuadraticPotential*>(terms[i].get())) {
      h += w * q->hessian();
      c += w * q->linear_term();
      constant += w * q->constant();
      any_quadratic = true;
    } else if (const auto* l = dynamic_cast<const L1Potential*>(terms[i].get())) {
      lambda += w * l->lambda();
      any_l1 = true;
    } else if (const auto* comp = dynamic_cast<const CompositePotential*>(terms[i].get())) {
      h += w * comp->smooth().hessian();
      c += w * comp->smooth().linear_term();
      constant += w * comp->smooth().constant();
      lambda += w * comp->lambda();
      any_quadratic = any_l1 = true;
    } else {
      foldable = false;
    }
  }
  if (!foldable) return std::make_shared<SumPotential>(terms, weights);
  if (!any_quadratic) return std::make_shared<L1Potential>(d, lambda);
  auto quad = std::make_shared<QuadraticPotential>(h, c, constant);
  if (!any_l1) return quad;
  return std::make_shared<CompositePotential>(quad, lambda);
}

}  // namespace mbflow::convex
