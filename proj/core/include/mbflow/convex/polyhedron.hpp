#pragma once

#include <limits>
#include <vector>

#include "mbflow/types.hpp"

namespace mbflow::convex {

/// The polyhedron {u : a_k . u <= b_k, k = 1..K}.
///
/// Projection is exact: it enumerates subsets of at most d linearly
/// independent constraints, solves the equality-constrained projection on each
/// and keeps the candidate satisfying the KKT conditions (feasible point,
/// nonnegative multipliers). That is only sensible for small K and d, which is
/// the regime this class is meant for.
class Polyhedron {
 public:
  /// Rows of `a` are the constraint normals. Throws InvalidArgument if K = 0,
  /// the sizes disagree, or the set is empty (checked by projecting the origin).
  Polyhedron(Mat a, Vec b);

  Index dimension() const { return a_.cols(); }
  Index num_constraints() const { return a_.rows(); }
  const Mat& normals() const { return a_; }
  const Vec& bounds() const { return b_; }

  /// max_k (a_k . x - b_k), clipped below at zero.
  double max_violation(const Vec& x) const;
  bool contains(const Vec& x, double tol = 1e-10) const { return max_violation(x) <= tol; }

  /// Indices of the constraints with a_k . x >= b_k - tol.
  std::vector<Index> active_set(const Vec& x, double tol = 1e-9) const;

  /// Nearest point of the polyhedron to x.
  Vec project(const Vec& x) const;

  /// Vertices found by enumerating d-subsets of constraints. Empty when the
  /// polyhedron has no vertex (e.g. a half-space).
  const std::vector<Vec>& vertices() const { return vertices_; }

 private:
  Vec project_enumerate(const Vec& x) const;
  void validate_projection(const Vec& x, const Vec& px) const;

  struct Face {
    std::vector<Index> rows;
    Mat normals;
    Vec bounds;
    Mat gram_inverse;
  };

  Mat a_;
  Vec b_;
  std::vector<Face> faces_;
  std::vector<Vec> vertices_;
};

/// Minimizer of 1/2 x^T H x + c^T x over a bounded polyhedron, H positive
/// semidefinite. Face enumeration: one equality-constrained solve per subset
/// of at most d independent constraints; the best feasible stationary
/// candidate wins. Constraints are passed as raw rows so that callers can
/// append half-spaces (e.g. the pieces of a kinked objective) cheaply.
struct QuadraticMinimum {
  Vec point;
  double value = std::numeric_limits<double>::infinity();
};

QuadraticMinimum minimize_quadratic(const Mat& h, const Vec& c, const Mat& a, const Vec& b);

/// Least-norm point of {p + G mu : 0 <= mu <= upper} (upper entries may be
/// +infinity, making the corresponding generator a cone ray). Solved by
/// enumerating, for every variable, whether it sits at a bound or is free.
struct MinNormPoint {
  Vec point;
  Vec mu;
};

MinNormPoint min_norm_point(const Vec& p, const Mat& generators, const Vec& upper);

}  // namespace mbflow::convex
