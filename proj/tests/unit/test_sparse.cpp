#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mbflow/convex/operators.hpp"
#include "mbflow/error.hpp"
#include "mbflow/flow/integrators.hpp"
#include "mbflow/flow/schedule.hpp"
#include "mbflow/problems/sparse.hpp"

using namespace mbflow;
using namespace mbflow::problems;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// RK4 on u' = -pi1^-1 A^T (A u - b).
Vec quadratic_branch_rk4(const SparseProblem& p, Vec u, double t, int steps = 4000) {
  const double dt = t / steps;
  auto f = [&](const Vec& w) -> Vec { return -(p.a.transpose() * (p.a * w - p.b)) / p.pi1; };
  for (int s = 0; s < steps; ++s) {
    const Vec k1 = f(u), k2 = f(u + 0.5 * dt * k1), k3 = f(u + 0.5 * dt * k2), k4 = f(u + dt * k3);
    u += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return u;
}

}  // namespace

TEST(SparseProblem, Validation) {
  auto p = example_sparse_problem();
  EXPECT_NO_THROW(p.validate());
  p.pi1 = 0.7;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = example_sparse_problem();
  p.b = vec({1, 2, 3});
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = example_sparse_problem();
  p.lambda = -1;
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(SparseProblem, ObjectiveAndGradient) {
  const auto p = example_sparse_problem();
  const Vec u = vec({0.3, -0.2});
  const Vec r = p.a * u - p.b;
  EXPECT_NEAR(sparse_objective(p, u), 0.5 * r.squaredNorm() + 0.5, 1e-14);
  EXPECT_LT((sparse_residual_gradient(p, u) - p.a.transpose() * r).norm(), 1e-14);
}

TEST(ExactSegments, QuadraticBranchMatchesRk4) {
  const auto p = example_sparse_problem();
  for (double t : {0.01, 0.1, 0.5, 2.0}) {
    const Vec exact = exact_mbd_segment(p, 1, vec({-1.0, 2.0}), t);
    EXPECT_LT((exact - quadratic_branch_rk4(p, vec({-1.0, 2.0}), t)).norm(), 1e-9) << t;
  }
}

TEST(ExactSegments, L1BranchSoftThresholds) {
  const auto p = example_sparse_problem();
  // lambda / pi2 = 2: threshold 2 t.
  EXPECT_EQ(exact_mbd_segment(p, 2, vec({1.0, -0.1}), 0.25), vec({0.5, 0.0}));
  EXPECT_EQ(exact_mbd_segment(p, 2, vec({1.0, -0.1}), 0.0), vec({1.0, -0.1}));
  EXPECT_THROW(exact_mbd_segment(p, 3, vec({1, 1}), 0.1), InvalidArgument);
  EXPECT_THROW(exact_mbd_segment(p, 1, vec({1, 1}), -0.1), InvalidArgument);
}

TEST(Lasso, OptimumSatisfiesKkt) {
  const auto p = example_sparse_problem();
  const auto sol = lasso_optimum(p);
  EXPECT_LE(sol.max_residual(), 1e-10);
  EXPECT_NEAR(sol.u[0], 0.65, 0.02);
  EXPECT_NEAR(sol.u[1], -0.45, 0.02);
  EXPECT_LE(lasso_kkt_residual(p, sol.u).lpNorm<Eigen::Infinity>(), 1e-10);
  EXPECT_GT(lasso_kkt_residual(p, Vec::Zero(2)).lpNorm<Eigen::Infinity>(), 0.1);
}

TEST(Lasso, LargeLambdaGivesZero) {
  auto p = example_sparse_problem();
  p.lambda = 100.0;
  EXPECT_EQ(lasso_optimum(p).u, Vec::Zero(2));
}

TEST(Reference, FlowApproachesOptimumAndSchemesAgree) {
  const auto p = example_sparse_problem();
  const auto fb = sparse_flow_reference(p, Vec::Zero(2), 20.0, 1e-3);
  EXPECT_LT((fb.final_state() - lasso_optimum(p).u).norm(), 1e-6);
  const auto nodes = flow::make_time_grid(2.0, 0.0, 41);
  const auto a = sparse_flow_reference(p, Vec::Zero(2), nodes, 1e-4);
  const auto b = sparse_flow_reference(p, Vec::Zero(2), nodes, 1e-4, SparseReferenceMode::ExplicitEuler);
  for (std::size_t i = 0; i < nodes.size(); ++i) EXPECT_LT((a.states[i] - b.states[i]).norm(), 1e-3);
  EXPECT_THROW(sparse_flow_reference(p, Vec::Zero(2), 1.0, 0.5, SparseReferenceMode::ExplicitEuler),
               InvalidArgument);
}

TEST(Reference, EnergyDecreases) {
  const auto p = example_sparse_problem();
  const auto tr = sparse_flow_reference(p, vec({2.0, 2.0}), 5.0, 1e-3);
  for (std::size_t i = 1; i < tr.size(); ++i)
    EXPECT_LE(sparse_objective(p, tr.states[i]), sparse_objective(p, tr.states[i - 1]) + 1e-12);
}

TEST(Gamma, VanishesAtLeastSquaresWithoutPenalty) {
  auto p = example_sparse_problem();
  p.lambda = 0.0;
  const Vec ls = p.a.colPivHouseholderQr().solve(p.b);
  EXPECT_NEAR(gamma_bound(p, ls), 0.0, 1e-20);
  // Formula check at u = 0: (pi2^2/pi1) |A^T b|^2 + (pi1^2/pi2) (lambda d)^2.
  const auto q = example_sparse_problem();
  EXPECT_NEAR(gamma_bound(q, Vec::Zero(2)), 0.5 * (q.a.transpose() * q.b).squaredNorm() + 0.5 * 4.0, 1e-12);
}

TEST(SparseSystem, SplitIsUnbiasedEverywhere) {
  const auto p = example_sparse_problem();
  const auto sys = make_sparse_system(p);
  EXPECT_TRUE(flow::validate_batch_system(sys).ok());
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int k = 0; k < 200; ++k) {
    Vec x = vec({u(rng), u(rng)});
    if (k % 2) x[k % 4 / 2] = 0.0;
    EXPECT_LE(flow::unbiasedness_residual(sys, x), 1e-12);
  }
  // At u = 0 the l1 part of the least-norm subgradient is lambda * clamp(A^T b / lambda).
  const auto s = sys.split(Vec::Zero(2));
  const Vec g = -p.a.transpose() * p.b;
  EXPECT_LT((s.xi[0] - g / p.pi1).norm(), 1e-14);
  EXPECT_LT((s.full - vec({convex::shrink(g[0], 1.0), convex::shrink(g[1], 1.0)})).norm(), 1e-14);
}

TEST(SparseModel, RealizationIsCompositionOfSegments) {
  const auto p = example_sparse_problem();
  const auto model = make_sparse_model(p, Vec::Zero(2), 1.0, 0.01);
  const auto sch = flow::draw_schedule(model.batch_probs, 0.25, 1.0, 3);
  const std::vector<double> nodes{0.0, 0.1, 0.25, 0.5, 0.75, 1.0};
  const auto states = model.realize(sch, nodes);
  // Independent composition: RK4 for the quadratic branch, soft thresholding
  // by 2 t for the l1 branch.
  Vec v = Vec::Zero(2);
  std::vector<Vec> starts{v};
  for (auto j : sch.indices) {
    v = j == 0 ? quadratic_branch_rk4(p, v, 0.25) : convex::soft_threshold(v, 2 * 0.25);
    starts.push_back(v);
  }
  EXPECT_LT((states[2] - starts[1]).norm(), 1e-9);
  EXPECT_LT((states[3] - starts[2]).norm(), 1e-9);
  EXPECT_LT((states[4] - starts[3]).norm(), 1e-9);
  EXPECT_LT((states[5] - starts[4]).norm(), 1e-9);
  const Vec mid = sch.indices[0] == 0 ? quadratic_branch_rk4(p, Vec::Zero(2), 0.1)
                                      : convex::soft_threshold(Vec::Zero(2), 0.2);
  EXPECT_LT((states[1] - mid).norm(), 1e-9);
}
