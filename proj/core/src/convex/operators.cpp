#include "mbflow/convex/operators.hpp"

#include <cmath>

#include "mbflow/error.hpp"

namespace mbflow::convex {

Vec soft_threshold(const Vec& x, double tau) {
  if (!(tau >= 0.0)) throw InvalidArgument("soft_threshold: threshold must be nonnegative");
  Vec out(x.size());
  for (Index i = 0; i < x.size(); ++i) out[i] = shrink(x[i], tau);
  return out;
}

Vec prox(const Potential& phi, const Vec& x, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("prox: step must be positive");
  if (x.size() != phi.dimension()) throw InvalidArgument("prox: dimension mismatch");
  return phi.prox(x, tau);
}

Vec minimal_norm_subgradient(const Potential& phi, const Vec& u) {
  if (u.size() != phi.dimension()) throw InvalidArgument("minimal_norm_subgradient: dimension mismatch");
  return phi.min_norm_subgradient(u);
}

Vec exact_quadratic_flow(const QuadraticPotential& q, const Vec& u0, double t) {
  if (!(t >= 0.0)) throw InvalidArgument("exact_quadratic_flow: time must be nonnegative");
  if (u0.size() != q.dimension()) throw InvalidArgument("exact_quadratic_flow: dimension mismatch");
  const Mat& v = q.eigenvectors();
  const Vec& lam = q.eigenvalues();
  const Vec z = v.transpose() * u0;
  const Vec g = v.transpose() * q.linear_term();
  Vec out(z.size());
  for (Index k = 0; k < z.size(); ++k) {
    const double x = t * lam[k];
    double integral;  // (1 - exp(-t lam)) / lam
    if (std::abs(x) < 1e-6) {
      integral = t * (1.0 - x / 2.0 + x * x / 6.0);
    } else {
      integral = -std::expm1(-x) / lam[k];
    }
    out[k] = std::exp(-x) * z[k] - g[k] * integral;
  }
  return v * out;
}

}  // namespace mbflow::convex
