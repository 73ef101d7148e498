#include "mbflow/convex/polyhedron.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mbflow/error.hpp"

namespace mbflow::convex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// All subsets of {0..k-1} with at most `max_size` elements, smallest first.
std::vector<std::vector<Index>> subsets_up_to(Index k, Index max_size) {
  std::vector<std::vector<Index>> out{{}};
  std::vector<Index> cur;
  std::function<void(Index)> rec = [&](Index start) {
    for (Index i = start; i < k; ++i) {
      cur.push_back(i);
      out.push_back(cur);
      if (static_cast<Index>(cur.size()) < max_size) rec(i + 1);
      cur.pop_back();
    }
  };
  if (max_size > 0) rec(0);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.size() < b.size(); });
  return out;
}

Mat select_rows(const Mat& a, const std::vector<Index>& rows) {
  Mat out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = a.row(rows[i]);
  return out;
}

Vec select(const Vec& b, const std::vector<Index>& rows) {
  Vec out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = b[rows[i]];
  return out;
}

bool independent_rows(const Mat& rows) {
  if (rows.rows() == 0) return true;
  Eigen::FullPivLU<Mat> lu(rows);
  lu.setThreshold(1e-12);
  return lu.rank() == rows.rows();
}

double violation(const Mat& a, const Vec& b, const Vec& x) {
  if (a.rows() == 0) return 0.0;
  return std::max(0.0, (a * x - b).maxCoeff());
}

}  // namespace

Polyhedron::Polyhedron(Mat a, Vec b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() < 1) throw InvalidArgument("Polyhedron: need at least one constraint");
  if (a_.rows() != b_.size()) throw InvalidArgument("Polyhedron: normals and bounds disagree in count");
  for (Index k = 0; k < a_.rows(); ++k)
    if (a_.row(k).norm() == 0.0) throw InvalidArgument("Polyhedron: zero constraint normal");

  for (auto& s : subsets_up_to(a_.rows(), a_.cols())) {
    if (s.empty()) continue;
    Mat as = select_rows(a_, s);
    if (!independent_rows(as)) continue;
    Mat gram_inv = (as * as.transpose()).inverse();
    Vec bs = select(b_, s);
    faces_.push_back({std::move(s), std::move(as), std::move(bs), std::move(gram_inv)});
  }

  for (const auto& f : faces_) {
    if (f.normals.rows() != a_.cols()) continue;
    const Vec v = f.normals.fullPivLu().solve(f.bounds);
    if (!contains(v, 1e-9 * std::max(1.0, b_.cwiseAbs().maxCoeff()))) continue;
    const bool seen = std::any_of(vertices_.begin(), vertices_.end(),
                                  [&](const Vec& w) { return (w - v).norm() <= 1e-9; });
    if (!seen) vertices_.push_back(v);
  }

  try {
    project_enumerate(Vec::Zero(a_.cols()));
  } catch (const SolverError&) {
    throw InvalidArgument("Polyhedron: the constraint set is empty");
  }
}

double Polyhedron::max_violation(const Vec& x) const { return violation(a_, b_, x); }

std::vector<Index> Polyhedron::active_set(const Vec& x, double tol) const {
  std::vector<Index> out;
  const Vec r = a_ * x - b_;
  for (Index k = 0; k < r.size(); ++k)
    if (r[k] >= -tol) out.push_back(k);
  return out;
}

Vec Polyhedron::project(const Vec& x) const {
  if (x.size() != dimension()) throw InvalidArgument("Polyhedron::project: dimension mismatch");
  if (max_violation(x) <= 0.0) return x;
  const Vec px = project_enumerate(x);
  validate_projection(x, px);
  return px;
}

Vec Polyhedron::project_enumerate(const Vec& x) const {
  const double scale = std::max({1.0, x.lpNorm<Eigen::Infinity>(), b_.lpNorm<Eigen::Infinity>()});
  const double feas_tol = 1e-10 * scale;
  const double mult_tol = 1e-12 * scale;
  if (max_violation(x) <= 0.0) return x;
  Vec best;
  double best_dist = kInf;
  for (const auto& f : faces_) {
    const Vec mu = f.gram_inverse * (f.normals * x - f.bounds);
    if (mu.minCoeff() < -mult_tol) continue;
    const Vec z = x - f.normals.transpose() * mu;
    if (max_violation(z) > feas_tol) continue;
    const double dist = (z - x).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = z;
    }
  }
  if (!std::isfinite(best_dist)) throw SolverError("Polyhedron::project: no KKT point found");
  return best;
}

void Polyhedron::validate_projection(const Vec& x, const Vec& px) const {
  // Variational inequality <x - Px, v - Px> <= 0 on every vertex of the set.
  const Vec r = x - px;
  const double scale = std::max(1.0, r.norm());
  for (const auto& v : vertices_) {
    const double ip = r.dot(v - px);
    if (ip > 1e-9 * scale * std::max(1.0, (v - px).norm()))
      throw SolverError("Polyhedron::project: projection fails the variational inequality");
  }
}

// ---------------------------------------------------------------------------

QuadraticMinimum minimize_quadratic(const Mat& h, const Vec& c, const Mat& a, const Vec& b) {
  const Index d = c.size();
  const double scale = std::max({1.0, h.cwiseAbs().maxCoeff(), c.lpNorm<Eigen::Infinity>(),
                                 b.size() ? b.lpNorm<Eigen::Infinity>() : 0.0});
  QuadraticMinimum best;
  for (const auto& s : subsets_up_to(a.rows(), d)) {
    const Mat as = select_rows(a, s);
    if (!independent_rows(as)) continue;
    const auto m = static_cast<Index>(s.size());
    Mat kkt = Mat::Zero(d + m, d + m);
    kkt.topLeftCorner(d, d) = h;
    kkt.topRightCorner(d, m) = as.transpose();
    kkt.bottomLeftCorner(m, d) = as;
    Vec rhs(d + m);
    rhs.head(d) = -c;
    rhs.tail(m) = select(b, s);
    const Vec sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if ((kkt * sol - rhs).lpNorm<Eigen::Infinity>() > 1e-9 * scale) continue;  // unbounded on this face
    const Vec x = sol.head(d);
    if (violation(a, b, x) > 1e-9 * scale) continue;
    const double val = 0.5 * x.dot(h * x) + c.dot(x);
    if (val < best.value) {
      best.value = val;
      best.point = x;
    }
  }
  if (!std::isfinite(best.value)) throw SolverError("minimize_quadratic: no feasible stationary face");
  return best;
}

MinNormPoint min_norm_point(const Vec& p, const Mat& generators, const Vec& upper) {
  const Index q = generators.cols();
  if (upper.size() != q) throw InvalidArgument("min_norm_point: one upper bound per generator");
  MinNormPoint best{p, Vec::Zero(q)};
  if (q == 0) return best;
  double best_norm = kInf;

  // state: 0 = at lower bound, 1 = at upper bound, 2 = free
  std::vector<int> state(static_cast<std::size_t>(q), 0);
  auto evaluate = [&] {
    Vec mu = Vec::Zero(q);
    Vec r = p;
    std::vector<Index> free;
    for (Index k = 0; k < q; ++k) {
      const int st = state[static_cast<std::size_t>(k)];
      if (st == 1) {
        mu[k] = upper[k];
        r += upper[k] * generators.col(k);
      } else if (st == 2) {
        free.push_back(k);
      }
    }
    if (!free.empty()) {
      Mat gf(generators.rows(), static_cast<Index>(free.size()));
      for (std::size_t i = 0; i < free.size(); ++i) gf.col(static_cast<Index>(i)) = generators.col(free[i]);
      const Vec mf = gf.completeOrthogonalDecomposition().solve(-r);
      for (std::size_t i = 0; i < free.size(); ++i) {
        const Index k = free[i];
        const double v = mf[static_cast<Index>(i)];
        const double tol = 1e-10 * std::max(1.0, std::abs(v));
        if (v < -tol || v > upper[k] + tol) return;
        mu[k] = std::clamp(v, 0.0, upper[k]);
      }
    }
    const Vec point = p + generators * mu;
    const double n = point.squaredNorm();
    if (n < best_norm) {
      best_norm = n;
      best = {point, mu};
    }
  };
  std::function<void(Index)> rec = [&](Index k) {
    if (k == q) {
      evaluate();
      return;
    }
    for (int st = 0; st < 3; ++st) {
      if (st == 1 && !std::isfinite(upper[k])) continue;
      state[static_cast<std::size_t>(k)] = st;
      rec(k + 1);
    }
  };
  rec(0);
  return best;
}

}  // namespace mbflow::convex
