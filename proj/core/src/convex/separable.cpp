#include "mbflow/convex/separable.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "mbflow/convex/operators.hpp"
#include "mbflow/error.hpp"

namespace mbflow::convex {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

SeparableObjective::SeparableObjective(Index dimension, std::vector<AbsTerm> abs_terms,
                                       std::vector<SquareTerm> square_terms, Vec linear)
    : abs_(std::move(abs_terms)), sq_(std::move(square_terms)), linear_(std::move(linear)) {
  if (linear_.size() != dimension) throw InvalidArgument("SeparableObjective: linear term has wrong size");
  for (const auto& t : abs_)
    if (t.coord < 0 || t.coord >= dimension || !(t.coef >= 0.0))
      throw InvalidArgument("SeparableObjective: bad absolute-value term");
  for (const auto& t : sq_)
    if (t.coord < 0 || t.coord >= dimension || !(t.coef >= 0.0))
      throw InvalidArgument("SeparableObjective: bad square term");
}

double SeparableObjective::value(const Vec& u) const {
  double v = linear_.dot(u);
  for (const auto& t : abs_) v += t.coef * std::abs(u[t.coord] - t.center);
  for (const auto& t : sq_) {
    const double r = u[t.coord] - t.center;
    v += t.coef * r * r;
  }
  return v;
}

Vec SeparableObjective::smooth_gradient(const Vec& u) const {
  Vec g = linear_;
  for (const auto& t : sq_) g[t.coord] += 2.0 * t.coef * (u[t.coord] - t.center);
  return g;
}

Vec SeparableObjective::min_norm_subgradient(const Vec& u, double kink_tol) const {
  const std::vector<double> none(static_cast<std::size_t>(dimension()), kNaN);
  return subgradient_with(u, none, kink_tol);
}

Vec SeparableObjective::subgradient_with(const Vec& u, const std::vector<double>& theta,
                                         double kink_tol) const {
  Vec g = smooth_gradient(u);
  Vec radius = Vec::Zero(dimension());
  for (const auto& t : abs_) {
    const double r = u[t.coord] - t.center;
    if (std::abs(r) > kink_tol) {
      g[t.coord] += r > 0 ? t.coef : -t.coef;
    } else {
      radius[t.coord] += t.coef;
    }
  }
  for (Index k = 0; k < dimension(); ++k) {
    if (radius[k] == 0.0) continue;
    const double th = theta[static_cast<std::size_t>(k)];
    g[k] = std::isnan(th) ? shrink(g[k], radius[k]) : g[k] + th * radius[k];
  }
  return g;
}

SeparableObjective SeparableObjective::scaled(double factor) const {
  SeparableObjective out = *this;
  for (auto& t : out.abs_) t.coef *= factor;
  for (auto& t : out.sq_) t.coef *= factor;
  out.linear_ *= factor;
  return out;
}

SeparableObjective operator+(const SeparableObjective& a, const SeparableObjective& b) {
  if (a.dimension() != b.dimension()) throw InvalidArgument("SeparableObjective: dimension mismatch in sum");
  SeparableObjective out = a;
  out.abs_.insert(out.abs_.end(), b.abs_.begin(), b.abs_.end());
  out.sq_.insert(out.sq_.end(), b.sq_.begin(), b.sq_.end());
  out.linear_ += b.linear_;
  return out;
}

// ---------------------------------------------------------------------------

ConstrainedSeparablePotential::ConstrainedSeparablePotential(SeparableObjective objective,
                                                             std::shared_ptr<const Polyhedron> set,
                                                             double feasibility_tol)
    : objective_(std::move(objective)), set_(std::move(set)), tol_(feasibility_tol) {
  if (!set_) throw InvalidArgument("ConstrainedSeparablePotential: null set");
  if (set_->dimension() != objective_.dimension())
    throw InvalidArgument("ConstrainedSeparablePotential: set and objective disagree on dimension");
}

double ConstrainedSeparablePotential::value(const Vec& u) const {
  return set_->contains(u, tol_) ? objective_.value(u) : std::numeric_limits<double>::infinity();
}

ConstrainedSeparablePotential::Decomposition ConstrainedSeparablePotential::decompose(const Vec& u) const {
  if (!set_->contains(u, tol_))
    throw InvalidArgument("ConstrainedSeparablePotential: point outside the feasible set");
  const Index d = dimension();
  constexpr double kink_tol = 1e-12;

  Vec base = objective_.smooth_gradient(u);
  std::vector<Vec> gens;
  std::vector<double> upper;
  std::vector<Index> kink_coord;
  for (const auto& t : objective_.abs_terms()) {
    const double r = u[t.coord] - t.center;
    if (std::abs(r) > kink_tol) {
      base[t.coord] += r > 0 ? t.coef : -t.coef;
    } else {
      base[t.coord] -= t.coef;
      Vec g = Vec::Zero(d);
      g[t.coord] = 2.0 * t.coef;
      gens.push_back(std::move(g));
      upper.push_back(1.0);
      kink_coord.push_back(t.coord);
    }
  }
  const std::size_t num_kinks = gens.size();
  const auto active = set_->active_set(u, 1e-9 * std::max(1.0, set_->bounds().lpNorm<Eigen::Infinity>()));
  for (Index k : active) {
    gens.emplace_back(set_->normals().row(k).transpose());
    upper.push_back(std::numeric_limits<double>::infinity());
  }

  Mat g(d, static_cast<Index>(gens.size()));
  for (std::size_t i = 0; i < gens.size(); ++i) g.col(static_cast<Index>(i)) = gens[i];
  const MinNormPoint mnp = min_norm_point(base, g, Eigen::Map<const Vec>(upper.data(), static_cast<Index>(upper.size())));

  Decomposition out{base, Vec::Zero(d), std::vector<double>(static_cast<std::size_t>(d), kNaN)};
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const double mu = mnp.mu[static_cast<Index>(i)];
    if (i < num_kinks) {
      out.objective_part += mu * gens[i];
      auto& th = out.theta[static_cast<std::size_t>(kink_coord[i])];
      if (std::isnan(th)) th = 2.0 * mu - 1.0;
    } else {
      out.cone_part += mu * gens[i];
    }
  }
  return out;
}

Vec ConstrainedSeparablePotential::min_norm_subgradient(const Vec& u) const { return decompose(u).total(); }

Vec ConstrainedSeparablePotential::prox(const Vec& x, double tau) const {
  if (!(tau > 0.0)) throw InvalidArgument("prox: step must be positive");
  return minimize(&x, tau).point;
}

QuadraticMinimum ConstrainedSeparablePotential::minimize(const Vec* prox_center, double tau) const {
  const Index d = dimension();
  // Distinct kinks; each sign pattern selects one smooth piece.
  std::vector<std::pair<Index, double>> kinks;
  for (const auto& t : objective_.abs_terms()) {
    const std::pair<Index, double> key{t.coord, t.center};
    if (t.coef > 0.0 && std::find(kinks.begin(), kinks.end(), key) == kinks.end()) kinks.push_back(key);
  }
  if (kinks.size() > 16) throw Unsupported("ConstrainedSeparablePotential::minimize: too many kinks");

  Mat h0 = Mat::Zero(d, d);
  Vec c0 = objective_.linear();
  for (const auto& t : objective_.square_terms()) {
    h0(t.coord, t.coord) += 2.0 * t.coef;
    c0[t.coord] -= 2.0 * t.coef * t.center;
  }
  if (prox_center) {
    h0 += Mat::Identity(d, d) / tau;
    c0 -= *prox_center / tau;
  }

  const Mat& ca = set_->normals();
  const Vec& cb = set_->bounds();
  QuadraticMinimum best;
  const std::size_t patterns = std::size_t{1} << kinks.size();
  for (std::size_t mask = 0; mask < patterns; ++mask) {
    Vec c = c0;
    Mat a(ca.rows() + static_cast<Index>(kinks.size()), d);
    Vec b(a.rows());
    a.topRows(ca.rows()) = ca;
    b.head(ca.rows()) = cb;
    for (std::size_t i = 0; i < kinks.size(); ++i) {
      const double sigma = (mask >> i) & 1U ? 1.0 : -1.0;
      const auto [coord, center] = kinks[i];
      for (const auto& t : objective_.abs_terms())
        if (t.coord == coord && t.center == center) c[coord] += sigma * t.coef;
      const auto row = ca.rows() + static_cast<Index>(i);
      a.row(row).setZero();
      a(row, coord) = -sigma;
      b[row] = -sigma * center;
    }
    QuadraticMinimum piece;
    try {
      piece = minimize_quadratic(h0, c, a, b);
    } catch (const SolverError&) {
      continue;  // piece does not meet the feasible set
    }
    double val = objective_.value(piece.point);
    if (prox_center) val += (piece.point - *prox_center).squaredNorm() / (2.0 * tau);
    if (val < best.value) best = {piece.point, val};
  }
  if (!std::isfinite(best.value)) throw SolverError("ConstrainedSeparablePotential::minimize: no feasible piece");
  return best;
}

}  // namespace mbflow::convex
