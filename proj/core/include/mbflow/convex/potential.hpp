#pragma once

#include <memory>
#include <string>

#include "mbflow/types.hpp"

namespace mbflow::convex {

/// A proper, convex, lower semicontinuous function on R^d.
///
/// Every potential exposes the three primitives the flow integrators need:
/// its value, the least-norm element of its subdifferential, and its proximal
/// map. Families whose gradient flow has a closed form additionally report
/// `has_exact_flow()` and implement `exact_flow()`.
class Potential {
 public:
  virtual ~Potential() = default;

  virtual Index dimension() const = 0;

  /// Value at u, +infinity outside the effective domain.
  virtual double value(const Vec& u) const = 0;

  /// Least-norm element of the subdifferential at u. Throws InvalidArgument
  /// when u is outside the domain of the subdifferential.
  virtual Vec min_norm_subgradient(const Vec& u) const = 0;

  /// argmin_w value(w) + |w - x|^2 / (2 tau), tau > 0.
  virtual Vec prox(const Vec& x, double tau) const = 0;

  virtual bool has_exact_flow() const { return false; }

  /// State reached after time t >= 0 along the gradient flow started at u0.
  virtual Vec exact_flow(const Vec& u0, double t) const;

  /// Membership test for the domain of the subdifferential, with a feasibility
  /// tolerance for families whose domain is a closed set.
  virtual bool in_domain(const Vec& u, double tol = 1e-10) const;

  virtual std::string name() const = 0;
};

using PotentialPtr = std::shared_ptr<const Potential>;

}  // namespace mbflow::convex
