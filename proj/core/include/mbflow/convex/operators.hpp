#pragma once

#include "mbflow/convex/potential.hpp"
#include "mbflow/convex/potentials.hpp"

namespace mbflow::convex {

/// Componentwise sgn(x_i) max(|x_i| - tau, 0). Throws InvalidArgument if tau < 0.
Vec soft_threshold(const Vec& x, double tau);

/// Proximal map of `phi` with step tau > 0.
Vec prox(const Potential& phi, const Vec& x, double tau);

/// Least-norm element of the subdifferential of `phi` at u.
Vec minimal_norm_subgradient(const Potential& phi, const Vec& u);

/// Solution at time t >= 0 of u' = -(H u + c), u(0) = u0, via the symmetric
/// eigendecomposition of H. The factor (1 - exp(-t lambda)) / lambda is
/// evaluated by its Taylor series when |t lambda| < 1e-6.
Vec exact_quadratic_flow(const QuadraticPotential& q, const Vec& u0, double t);

/// Least-norm point of the interval [g - r, g + r] for r >= 0, i.e. g shrunk
/// toward zero by r. Used by every clamp-rule subgradient selection.
inline double shrink(double g, double r) {
  if (g > r) return g - r;
  if (g < -r) return g + r;
  return 0.0;
}

}  // namespace mbflow::convex
