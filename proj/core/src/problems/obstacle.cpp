#include "mbflow/problems/obstacle.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mbflow/error.hpp"
#include "mbflow/flow/schedule.hpp"

namespace mbflow::problems {

Grid2D::Grid2D(int n_interior) : n(n_interior) {
  if (n < 4) throw InvalidArgument("Grid2D: need at least 4 interior nodes per direction");
}

Vec Grid2D::sample(const std::function<double(double, double)>& f) const {
  Vec out(size());
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) out[index(r, c)] = f(coord(c), coord(r));
  return out;
}

void ObstacleSpec::validate(const Grid2D& grid) const {
  const Index n = grid.size();
  if (psi.size() != n || f.size() != n || u0.size() != n)
    throw InvalidArgument("ObstacleSpec: psi, f and u0 must be grid functions of the given grid");
  if (!(delta > 0.0)) throw InvalidArgument("ObstacleSpec: delta must be positive");
  if (!(smooth_width > 0.0)) throw InvalidArgument("ObstacleSpec: smoothing width must be positive");
  if (!(horizon > 0.0)) throw InvalidArgument("ObstacleSpec: horizon must be positive");
  if (!psi.allFinite() || !f.allFinite() || !u0.allFinite())
    throw InvalidArgument("ObstacleSpec: data must be finite");
}

double two_disc_obstacle(double x, double y) {
  const double left = 4.0 * (x + 0.5) * (x + 0.5) + 4.0 * y * y;
  if (left < 1.0) return -left;
  const double right = 4.0 * (x - 0.5) * (x - 0.5) + 4.0 * y * y;
  if (right < 1.0) return -right;
  return 0.0;
}

ObstacleSpec example_obstacle_spec(const Grid2D& grid) {
  ObstacleSpec s;
  s.psi = grid.sample(two_disc_obstacle);
  s.f = Vec::Constant(grid.size(), -1.0);
  s.u0 = Vec::Zero(grid.size());
  return s;
}

double smooth_max(double x, double s) {
  const double r = std::hypot(x, s);
  return x >= 0.0 ? 0.5 * (x + r) : 0.5 * s * s / (r - x);
}

double smooth_max_derivative(double x, double s) { return 0.5 * (1.0 + x / std::hypot(x, s)); }

double smooth_max_integral(double x, double s) {
  // x^2/4 + (x r + s^2 asinh(x/s))/4; for x < 0 the first two terms combine
  // into x s^2 / (r - x) to avoid cancellation.
  const double r = std::hypot(x, s);
  const double as = s * s * std::asinh(x / s);
  if (x >= 0.0) return 0.25 * (x * x + x * r + as);
  return 0.25 * (x * s * s / (r - x) + as);
}

double ramp(double x, double w) {
  if (!(w > 0.0)) throw InvalidArgument("ramp: half-width must be positive");
  if (x <= -w) return 0.0;
  if (x >= w) return 1.0;
  return (x + w) / (2.0 * w);
}

double PartitionOfUnity::weight(int i, double x, double y) const {
  const double hx = ramp(x, halfwidth), hy = ramp(y, halfwidth);
  switch (i) {
    case 0: return (1.0 - hx) * (1.0 - hy);
    case 1: return hx * (1.0 - hy);
    case 2: return (1.0 - hx) * hy;
    case 3: return hx * hy;
    default: throw InvalidArgument("PartitionOfUnity: subdomain index must be 0..3");
  }
}

PartitionOfUnity build_partition(const Grid2D& grid, double ramp_halfwidth) {
  PartitionOfUnity p;
  p.halfwidth = ramp_halfwidth;
  for (int i = 0; i < 4; ++i) p.chi[i] = grid.sample([&](double x, double y) { return p.weight(i, x, y); });
  return p;
}

SpMat weighted_laplacian(const Grid2D& grid, const WeightFn& chi) {
  const int n = grid.n;
  const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(5 * grid.size()));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const Index i = grid.index(r, c);
      const double xc = grid.coord(c), yc = grid.coord(r);
      const double here = chi(xc, yc);
      double diag = 0.0;
      const int dr[4] = {0, 0, -1, 1};
      const int dc[4] = {-1, 1, 0, 0};
      for (int k = 0; k < 4; ++k) {
        const int rr = r + dr[k], cc = c + dc[k];
        const double w = 0.5 * (here + chi(grid.coord(cc), grid.coord(rr))) * inv_h2;
        diag -= w;
        if (rr >= 0 && rr < n && cc >= 0 && cc < n) trip.emplace_back(i, grid.index(rr, cc), w);
      }
      trip.emplace_back(i, i, diag);
    }
  }
  SpMat l(grid.size(), grid.size());
  l.setFromTriplets(trip.begin(), trip.end());
  return l;
}

SpMat weighted_laplacian(const Grid2D& grid, const PartitionOfUnity& part, const std::array<double, 4>& coefs) {
  return weighted_laplacian(grid, [&](double x, double y) {
    double v = 0.0;
    for (int i = 0; i < 4; ++i)
      if (coefs[i] != 0.0) v += coefs[i] * part.weight(i, x, y);
    return v;
  });
}

namespace {

std::vector<std::array<double, 4>> batch_coefficients(const DdBatches& b) {
  if (b.batches.empty() || b.batches.size() != b.probs.size())
    throw InvalidArgument("DdBatches: need one probability per batch");
  double psum = 0.0;
  std::array<double, 4> p{};
  for (std::size_t j = 0; j < b.batches.size(); ++j) {
    if (!(b.probs[j] > 0.0)) throw InvalidArgument("DdBatches: probabilities must be positive");
    psum += b.probs[j];
    if (b.batches[j].empty()) throw InvalidArgument("DdBatches: empty batch");
    for (int i : b.batches[j]) {
      if (i < 0 || i > 3) throw InvalidArgument("DdBatches: subdomain index must be 0..3");
      p[i] += b.probs[j] / static_cast<double>(b.batches[j].size());
    }
  }
  if (std::abs(psum - 1.0) > 1e-12) throw InvalidArgument("DdBatches: probabilities must sum to 1");
  for (double pi : p)
    if (!(pi > 0.0)) throw InvalidArgument("DdBatches: every subdomain must belong to some batch");
  std::vector<std::array<double, 4>> out;
  for (const auto& batch : b.batches) {
    std::array<double, 4> c{};
    for (int i : batch) c[i] += 1.0 / (static_cast<double>(batch.size()) * p[i]);
    out.push_back(c);
  }
  return out;
}

}  // namespace

ObstacleModel::ObstacleModel(Grid2D grid, ObstacleSpec spec, double ramp_halfwidth, DdBatches batches,
                             NewtonOptions newton)
    : grid_(grid), spec_(std::move(spec)), batches_(std::move(batches)), newton_(newton) {
  spec_.validate(grid_);
  if (!(newton_.tolerance > 0.0) || newton_.max_iterations < 1)
    throw InvalidArgument("ObstacleModel: bad Newton options");
  part_ = build_partition(grid_, ramp_halfwidth);
  full_op_ = weighted_laplacian(grid_, [](double, double) { return 1.0; });
  const auto coefs = batch_coefficients(batches_);
  for (const auto& c : coefs) {
    if (batches_.zero_variance) {
      batch_ops_.push_back(full_op_);
      batch_src_.push_back(spec_.f);
      continue;
    }
    batch_ops_.push_back(weighted_laplacian(grid_, part_, c));
    Vec chi = Vec::Zero(grid_.size());
    for (int i = 0; i < 4; ++i) chi += c[i] * part_.chi[i];
    batch_src_.push_back(chi.cwiseProduct(spec_.f));
  }
}

Vec ObstacleModel::implicit_step(const Vec& u, double h, const SpMat& op, const Vec& source) const {
  if (!(h > 0.0)) throw InvalidArgument("implicit_step: step must be positive");
  if (u.size() != grid_.size()) throw InvalidArgument("implicit_step: state has wrong size");
  const double s = spec_.smooth_width;
  const double kappa = h / spec_.delta;
  const Index n = u.size();

  SpMat ident(n, n);
  ident.setIdentity();
  const SpMat base = ident - h * op;
  const Vec base_diag = base.diagonal();
  Eigen::SimplicialLDLT<SpMat> solver;
  solver.analyzePattern(base);

  Vec w = u;
  Vec dp(n), dp_factored = Vec::Constant(n, -1.0);
  std::vector<double> history;
  for (int it = 0; it <= newton_.max_iterations; ++it) {
    Vec r = w - u - h * (op * w + source);
    for (Index i = 0; i < n; ++i) {
      const double x = spec_.psi[i] - w[i];
      r[i] -= kappa * smooth_max(x, s);
      dp[i] = smooth_max_derivative(x, s);
    }
    const Vec jdiag = base_diag + kappa * dp;
    const double res = r.cwiseQuotient(jdiag).lpNorm<Eigen::Infinity>();
    history.push_back(res);
    if (res <= newton_.tolerance) return w;
    if (it == newton_.max_iterations) break;
    // Refactor only when the penalty derivative moved.
    if ((dp - dp_factored).lpNorm<Eigen::Infinity>() > 1e-14) {
      SpMat jac = base;
      for (Index i = 0; i < n; ++i) jac.coeffRef(i, i) += kappa * dp[i];
      solver.factorize(jac);
      if (solver.info() != Eigen::Success) throw SolverError("implicit_step: factorization failed");
      dp_factored = dp;
    }
    w -= solver.solve(r);
  }
  std::ostringstream msg;
  msg << "implicit_step: Newton did not converge in " << newton_.max_iterations << " iterations; residuals:";
  for (double v : history) msg << ' ' << v;
  throw SolverError(msg.str());
}

Vec ObstacleModel::penalized_step(const Vec& u, double h) const { return implicit_step(u, h, full_op_, spec_.f); }

Vec ObstacleModel::dd_step(const Vec& u, std::size_t j, double epsilon) const {
  if (j >= batch_ops_.size()) throw InvalidArgument("dd_step: batch index out of range");
  return implicit_step(u, epsilon, batch_ops_[j], batch_src_[j]);
}

double ObstacleModel::energy(const Vec& u) const {
  double pen = 0.0;
  for (Index i = 0; i < u.size(); ++i) pen += smooth_max_integral(spec_.psi[i] - u[i], spec_.smooth_width);
  return -0.5 * u.dot(full_op_ * u) - spec_.f.dot(u) + pen / spec_.delta;
}

std::vector<Vec> ObstacleModel::reference_sequence(double h) const {
  const std::size_t k = flow::num_segments(h, spec_.horizon);
  std::vector<Vec> seq{spec_.u0};
  seq.reserve(k + 1);
  for (std::size_t i = 0; i < k; ++i) {
    try {
      seq.push_back(penalized_step(seq.back(), h));
    } catch (const SolverError& e) {
      throw SolverError(e.what(), static_cast<double>(i + 1) * h);
    }
  }
  return seq;
}

Vec ObstacleModel::stationary_solution(double tol, long max_sweeps) const {
  const SpMat& l = full_op_;  // column access equals row access, l is symmetric
  Vec w = spec_.psi.cwiseMax(0.0);
  for (long sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (Index i = 0; i < w.size(); ++i) {
      double off = 0.0, diag = 0.0;
      for (SpMat::InnerIterator itr(l, i); itr; ++itr) {
        if (itr.row() == i) {
          diag = itr.value();
        } else {
          off += itr.value() * w[itr.row()];
        }
      }
      // -(diag w_i + off) = f_i  =>  w_i = -(f_i + off) / diag
      const double wi = std::max(spec_.psi[i], -(spec_.f[i] + off) / diag);
      change = std::max(change, std::abs(wi - w[i]));
      w[i] = wi;
    }
    if (change <= tol) return w;
  }
  throw SolverError("stationary_solution: projected Gauss-Seidel hit the sweep cap");
}

namespace {

// Piecewise-constant embedding u(t) = seq[k_t], k_t = floor(t/h) + 1 clamped to [1, K].
std::vector<Vec> embed(const std::vector<Vec>& seq, double h, const std::vector<double>& nodes) {
  const std::size_t k_max = seq.size() - 1;
  std::vector<Vec> out;
  out.reserve(nodes.size());
  for (double t : nodes) {
    auto k = static_cast<std::size_t>(std::floor(t / h + 1e-9)) + 1;
    k = std::clamp<std::size_t>(k, 1, k_max);
    out.push_back(seq[k]);
  }
  return out;
}

// Linear interpolation of seq[k] placed at t = k h.
std::vector<Vec> interpolate(const std::vector<Vec>& seq, double h, const std::vector<double>& nodes) {
  const std::size_t k_max = seq.size() - 1;
  std::vector<Vec> out;
  out.reserve(nodes.size());
  for (double t : nodes) {
    const double pos = t / h;
    auto k = static_cast<std::size_t>(std::floor(pos));
    if (k >= k_max) {
      out.push_back(seq[k_max]);
      continue;
    }
    const double a = pos - static_cast<double>(k);
    out.push_back((1.0 - a) * seq[k] + a * seq[k + 1]);
  }
  return out;
}

}  // namespace

flow::MonteCarloModel ObstacleModel::monte_carlo_model(double h_ref, ReferenceMode mode) const {
  if (!(h_ref > 0.0)) throw InvalidArgument("monte_carlo_model: reference step must be positive");
  auto self = std::make_shared<const ObstacleModel>(*this);
  auto ref_seq = std::make_shared<const std::vector<Vec>>(reference_sequence(h_ref));
  flow::MonteCarloModel m;
  m.batch_probs = batches_.probs;
  m.horizon = spec_.horizon;
  m.reference = [ref_seq, h_ref, mode](const std::vector<double>& nodes) {
    return mode == ReferenceMode::Embedded ? embed(*ref_seq, h_ref, nodes) : interpolate(*ref_seq, h_ref, nodes);
  };
  m.realize = [self](const flow::BatchSchedule& s, const std::vector<double>& nodes) {
    std::vector<Vec> seq{self->spec().u0};
    seq.reserve(s.size() + 1);
    for (std::size_t k = 1; k <= s.size(); ++k) {
      try {
        seq.push_back(self->dd_step(seq.back(), s.batch(k), s.epsilon));
      } catch (const SolverError& e) {
        throw SolverError(e.what(), s.switch_time(k));
      }
    }
    return embed(seq, s.epsilon, nodes);
  };
  const double h2 = grid_.spacing() * grid_.spacing();
  m.distance_sq = [h2](const Vec& a, const Vec& b) { return h2 * (a - b).squaredNorm(); };
  return m;
}

Vec penalized_step(const Grid2D& grid, const ObstacleSpec& spec, const Vec& state, double h_time) {
  return ObstacleModel(grid, spec).penalized_step(state, h_time);
}

Vec dd_minimizing_step(const Grid2D& grid, const ObstacleSpec& spec, const PartitionOfUnity& part,
                       const DdBatches& batches, std::size_t j, const Vec& state, double epsilon) {
  return ObstacleModel(grid, spec, part.halfwidth, batches).dd_step(state, j, epsilon);
}

flow::ConvergenceReport run_dd_experiment(const ObstacleSpec& spec, const Grid2D& grid,
                                          const std::vector<double>& epsilons, const DdExperimentOptions& opts) {
  if (epsilons.empty()) throw InvalidArgument("run_dd_experiment: empty epsilon list");
  const ObstacleModel model(grid, spec, opts.ramp_halfwidth, opts.batches);
  const double h_ref = opts.h_ref > 0.0 ? opts.h_ref : *std::min_element(epsilons.begin(), epsilons.end()) / 16.0;
  flow::MonteCarloOptions mc;
  mc.realizations = opts.realizations;
  mc.base_seed = opts.base_seed;
  mc.threads = opts.threads;
  return flow::convergence_sweep(model.monte_carlo_model(h_ref, opts.reference_mode), epsilons, mc, flow::ErrorMetric::Norm,
                                 flow::Scheme::MinimizingMovement);
}

}  // namespace mbflow::problems
