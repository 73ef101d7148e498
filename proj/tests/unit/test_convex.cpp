#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "mbflow/convex/operators.hpp"
#include "mbflow/convex/polyhedron.hpp"
#include "mbflow/convex/potentials.hpp"
#include "mbflow/convex/separable.hpp"
#include "mbflow/error.hpp"

using namespace mbflow;
using namespace mbflow::convex;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

std::shared_ptr<Polyhedron> unit_box(Index d) {
  Mat a(2 * d, d);
  a << Mat::Identity(d, d), -Mat::Identity(d, d);
  return std::make_shared<Polyhedron>(a, Vec::Ones(2 * d));
}

}  // namespace

TEST(SoftThreshold, ShrinksTowardZero) {
  const Vec r = soft_threshold(vec({3.0, -0.5, -2.0, 0.0}), 1.0);
  EXPECT_EQ(r, vec({2.0, 0.0, -1.0, 0.0}));
  EXPECT_THROW(soft_threshold(vec({1.0}), -0.1), InvalidArgument);
}

TEST(Shrink, LeastNormPointOfInterval) {
  EXPECT_DOUBLE_EQ(shrink(3.0, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(shrink(-3.0, 1.0), -2.0);
  EXPECT_DOUBLE_EQ(shrink(0.4, 1.0), 0.0);
}

TEST(QuadraticPotential, RejectsBadHessians) {
  Mat asym(2, 2);
  asym << 1, 2, 0, 1;
  EXPECT_THROW(QuadraticPotential(asym, Vec::Zero(2)), InvalidArgument);
  Mat indef(2, 2);
  indef << 1, 0, 0, -1;
  EXPECT_THROW(QuadraticPotential(indef, Vec::Zero(2)), InvalidArgument);
  EXPECT_THROW(QuadraticPotential(Mat::Identity(2, 2), Vec::Zero(3)), InvalidArgument);
}

TEST(QuadraticPotential, ProxSatisfiesOptimality) {
  Mat h(2, 2);
  h << 2, 0.5, 0.5, 1;
  const QuadraticPotential q(h, vec({1, -1}), 3.0);
  const Vec x = vec({0.3, 2.0});
  const double tau = 0.7;
  const Vec p = q.prox(x, tau);
  EXPECT_LT(((p - x) / tau + q.gradient(p)).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(q.value(Vec::Zero(2)), 3.0);
}

TEST(QuadraticPotential, ExactFlowHandlesZeroEigenvalues) {
  // H = diag(0, 2): the first coordinate drifts linearly, the second relaxes.
  Mat h = Mat::Zero(2, 2);
  h(1, 1) = 2.0;
  const QuadraticPotential q(h, vec({0.5, -2.0}));
  const Vec u = exact_quadratic_flow(q, vec({1.0, 0.0}), 1.5);
  EXPECT_NEAR(u[0], 1.0 - 0.5 * 1.5, 1e-14);
  EXPECT_NEAR(u[1], 1.0 - std::exp(-3.0), 1e-14);
}

TEST(L1Potential, ProxAndFlow) {
  const L1Potential l1(3, 2.0);
  EXPECT_EQ(l1.prox(vec({3, -1, 0.5}), 0.5), soft_threshold(vec({3, -1, 0.5}), 1.0));
  // Each coordinate moves toward zero at speed lambda and stops there.
  EXPECT_EQ(l1.exact_flow(vec({3, -1, 0.5}), 1.0), vec({1, 0, 0}));
  EXPECT_EQ(l1.min_norm_subgradient(vec({1, 0, -2})), vec({2, 0, -2}));
  EXPECT_THROW(L1Potential(2, -1.0), InvalidArgument);
}

TEST(CompositePotential, ClampRuleAtKinks) {
  Mat h(2, 2);
  h << 1, 0, 0, 1;
  auto q = std::make_shared<QuadraticPotential>(h, vec({-0.5, -3.0}));
  const CompositePotential phi(q, 1.0);
  // At u = 0: g = (-0.5, -3). |g_1| <= lambda gives 0; g_2 is shrunk by lambda.
  EXPECT_LT((phi.min_norm_subgradient(Vec::Zero(2)) - vec({0.0, -2.0})).norm(), 1e-15);
  EXPECT_LT((phi.l1_selection(Vec::Zero(2)) - vec({0.5, 1.0})).norm(), 1e-15);
}

TEST(CompositePotential, ProxSatisfiesInclusion) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Mat b(3, 3);
    for (Index i = 0; i < 9; ++i) b.data()[i] = n(rng);
    auto q = std::make_shared<QuadraticPotential>(b * b.transpose(), vec({n(rng), n(rng), n(rng)}));
    const double lam = 0.8;
    const CompositePotential phi(q, lam);
    const Vec x = vec({n(rng), n(rng), n(rng)});
    const double tau = 0.4;
    const Vec p = phi.prox(x, tau);
    // 0 in (p - x)/tau + grad q(p) + lam d|p|_1.
    const Vec r = (p - x) / tau + q->gradient(p);
    for (Index i = 0; i < 3; ++i) {
      if (std::abs(p[i]) > 1e-10)
        EXPECT_NEAR(r[i] + lam * (p[i] > 0 ? 1 : -1), 0.0, 1e-8);
      else
        EXPECT_LE(std::abs(r[i]), lam + 1e-8);
    }
  }
}

TEST(IndicatorPotential, ProjectsAndHasZeroInteriorSubgradient) {
  const IndicatorPotential ind(unit_box(2));
  EXPECT_EQ(ind.prox(vec({3, -0.2}), 1.0), vec({1, -0.2}));
  EXPECT_EQ(ind.min_norm_subgradient(vec({0.5, 0.5})), Vec::Zero(2));
  EXPECT_TRUE(std::isinf(ind.value(vec({2, 0}))));
  EXPECT_EQ(ind.value(vec({0.2, 0})), 0.0);
}

TEST(Polyhedron, ProjectionOntoBoxAndHalfSpace) {
  const auto box = unit_box(3);
  EXPECT_EQ(box->project(vec({0.1, 0.2, 0.3})), vec({0.1, 0.2, 0.3}));
  EXPECT_LT((box->project(vec({5, -5, 0.5})) - vec({1, -1, 0.5})).norm(), 1e-14);
  EXPECT_EQ(box->vertices().size(), 8u);

  Mat a(1, 2);
  a << 1, 1;
  const Polyhedron half(a, vec({1.0}));
  EXPECT_LT((half.project(vec({2, 2})) - vec({0.5, 0.5})).norm(), 1e-14);
  EXPECT_TRUE(half.vertices().empty());
  EXPECT_EQ(half.active_set(vec({0.5, 0.5})), std::vector<Index>{0});
}

TEST(Polyhedron, EmptySetIsRejected) {
  Mat a(2, 1);
  a << 1, -1;
  EXPECT_THROW(Polyhedron(a, vec({-1.0, -1.0})), InvalidArgument);  // u <= -1 and u >= 1
  EXPECT_THROW(Polyhedron(Mat::Zero(1, 2), vec({1.0})), InvalidArgument);
}

TEST(Polyhedron, ProjectionVariationalInequality) {
  Mat a(5, 2);
  a << 5, 3, 4, 6, 1, -2, -1, 0, 0, 1;
  const Polyhedron c(a, vec({120, 150, 0, -7, 15}));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10, 40);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec x = vec({u(rng), u(rng)});
    const Vec px = c.project(x);
    ASSERT_TRUE(c.contains(px, 1e-10));
    for (const auto& v : c.vertices()) EXPECT_LE((x - px).dot(v - px), 1e-8);
  }
}

TEST(MinimizeQuadratic, DiagonalCaseClamps) {
  // min 1/2 |x|^2 - (2, -0.3) . x on the unit box: clamp of (2, -0.3).
  const auto box = unit_box(2);
  const auto m = minimize_quadratic(Mat::Identity(2, 2), vec({-2, 0.3}), box->normals(), box->bounds());
  EXPECT_LT((m.point - vec({1, -0.3})).norm(), 1e-12);
  EXPECT_NEAR(m.value, 0.5 * (1 + 0.09) - 2 - 0.09, 1e-12);
}

TEST(MinNormPoint, ConeAndBoxGenerators) {
  // p = (1, 1), generator (-1, 0) bounded by 0.5 and ray (0, -1).
  Mat g(2, 2);
  g << -1, 0, 0, -1;
  const auto r = min_norm_point(vec({1, 1}), g, vec({0.5, INFINITY}));
  EXPECT_LT((r.point - vec({0.5, 0})).norm(), 1e-12);
  EXPECT_NEAR(r.mu[0], 0.5, 1e-12);
  EXPECT_NEAR(r.mu[1], 1.0, 1e-12);
}

TEST(SeparableObjective, LeastNormSubgradient) {
  // 2|u1 - 1| + (u2 - 3)^2 - u1
  const SeparableObjective f(2, {{0, 2.0, 1.0}}, {{1, 1.0, 3.0}}, vec({-1, 0}));
  EXPECT_DOUBLE_EQ(f.value(vec({1, 3})), -1.0);
  // At the kink u1 = 1 the interval is [-3, 1]; least norm is 0.
  EXPECT_LT((f.min_norm_subgradient(vec({1, 2})) - vec({0, -2})).norm(), 1e-15);
  EXPECT_LT((f.min_norm_subgradient(vec({2, 3})) - vec({1, 0})).norm(), 1e-15);
  const auto g = f.subgradient_with(vec({1, 3}), {-1.0, NAN});
  EXPECT_LT((g - vec({-3, 0})).norm(), 1e-15);
}

TEST(SumPotential, ProxAgreesWithMergedQuadratic) {
  Mat h1(2, 2), h2(2, 2);
  h1 << 2, 0.3, 0.3, 1;
  h2 << 0.5, 0, 0, 3;
  auto q1 = std::make_shared<QuadraticPotential>(h1, vec({1, 0}));
  auto q2 = std::make_shared<QuadraticPotential>(h2, vec({0, -2}));
  const SumPotential sum({q1, q2}, {0.3, 0.7});
  const QuadraticPotential merged(0.3 * h1 + 0.7 * h2, vec({0.3, -1.4}));
  const Vec x = vec({1.5, -0.5});
  EXPECT_LT((sum.prox(x, 0.8) - merged.prox(x, 0.8)).norm(), 1e-6);
  EXPECT_NEAR(sum.value(x), merged.value(x), 1e-12);
}

TEST(Combine, FoldsIntoSpecificFamilies) {
  auto q = std::make_shared<QuadraticPotential>(Mat::Identity(2, 2), Vec::Zero(2));
  auto l1 = std::make_shared<L1Potential>(2, 1.0);
  EXPECT_EQ(combine({q, q}, {0.5, 0.5})->name(), "quadratic");
  EXPECT_EQ(combine({q, l1}, {0.5, 0.5})->name(), "quadratic+l1");
  EXPECT_EQ(combine({l1, l1}, {0.5, 0.5})->name(), "l1");
  EXPECT_EQ(combine({q}, {1.0}).get(), q.get());
  auto ind = std::make_shared<IndicatorPotential>(unit_box(2));
  EXPECT_EQ(combine({q, ind}, {0.5, 0.5})->name(), "sum");
}

TEST(ConstrainedSeparable, ProxMatchesBruteForce) {
  const auto box = unit_box(2);
  const SeparableObjective f(2, {{0, 1.0, 0.2}}, {{1, 0.5, -0.3}}, vec({0.1, 0.4}));
  const ConstrainedSeparablePotential phi(f, box);
  const Vec x = vec({1.7, -0.4});
  const double tau = 0.6;
  const Vec p = phi.prox(x, tau);
  auto obj = [&](const Vec& w) { return f.value(w) + (w - x).squaredNorm() / (2 * tau); };
  double best = INFINITY;
  for (int i = 0; i <= 400; ++i)
    for (int j = 0; j <= 400; ++j) best = std::min(best, obj(vec({-1 + i * 0.005, -1 + j * 0.005})));
  EXPECT_LE(obj(p), best + 1e-12);
  EXPECT_GE(obj(p), best - 1e-4);
  EXPECT_TRUE(box->contains(p));
}
