#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <set>

#include "mbflow/convex/potentials.hpp"
#include "mbflow/error.hpp"
#include "mbflow/flow/batch_system.hpp"
#include "mbflow/flow/integrators.hpp"
#include "mbflow/flow/monte_carlo.hpp"
#include "mbflow/flow/schedule.hpp"
#include "mbflow/rng.hpp"

using namespace mbflow;
using namespace mbflow::flow;
using convex::L1Potential;
using convex::QuadraticPotential;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// 1/2 u^2 - u and 0.5 |u| with equal weights and singleton batches.
BatchSystem split_1d() {
  BatchSystemData d;
  d.sub_potentials = {std::make_shared<QuadraticPotential>(Mat::Identity(1, 1), vec({-1.0})),
                      std::make_shared<L1Potential>(1, 0.5)};
  d.weights = {0.5, 0.5};
  d.batches = {{0}, {1}};
  d.batch_probs = {0.5, 0.5};
  return BatchSystem(std::move(d));
}

BatchSystem two_quadratics() {
  Mat h1(2, 2), h2(2, 2);
  h1 << 1.0, 0.3, 0.3, 0.4;
  h2 << 0.2, -0.1, -0.1, 0.9;
  BatchSystemData d;
  d.sub_potentials = {std::make_shared<QuadraticPotential>(h1, vec({-1.0, 0.5})),
                      std::make_shared<QuadraticPotential>(h2, vec({0.8, -1.2}))};
  d.weights = {0.5, 0.5};
  d.batches = {{0}, {1}};
  d.batch_probs = {0.5, 0.5};
  return BatchSystem(std::move(d));
}

BatchSystemData data_with(std::vector<double> w, std::vector<std::vector<Index>> b, std::vector<double> pi) {
  BatchSystemData d;
  auto q = std::make_shared<QuadraticPotential>(Mat::Identity(1, 1), vec({0.0}));
  d.sub_potentials = {q, q, q};
  d.weights = std::move(w);
  d.batches = std::move(b);
  d.batch_probs = std::move(pi);
  return d;
}

}  // namespace

TEST(CounterRng, PureFunctionOfKey) {
  const CounterRng a(42, 0), b(42, 0), c(42, 1), d(43, 0);
  for (std::uint64_t k = 0; k < 100; ++k) {
    EXPECT_EQ(a.bits(k), b.bits(k));
    EXPECT_NE(a.bits(k), c.bits(k));
    EXPECT_NE(a.bits(k), d.bits(k));
    const double x = a.uniform(k);
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(SampleCategorical, TiesGoToLowerIndex) {
  const std::vector<double> cum{0.25, 0.5, 1.0};
  EXPECT_EQ(sample_categorical(cum, 0.0), 0u);
  EXPECT_EQ(sample_categorical(cum, 0.2499), 0u);
  EXPECT_EQ(sample_categorical(cum, 0.25), 1u);
  EXPECT_EQ(sample_categorical(cum, 0.75), 2u);
}

TEST(Schedule, SegmentCount) {
  EXPECT_EQ(num_segments(0.1, 1.0), 10u);
  EXPECT_EQ(num_segments(0.3, 1.0), 4u);
  EXPECT_EQ(num_segments(0.04, 5.0), 125u);
  EXPECT_EQ(num_segments(0.5 / 60, 0.5), 60u);
}

TEST(Schedule, FrequenciesMatchProbabilities) {
  const auto s = draw_schedule(std::vector<double>{0.5, 0.25, 0.25}, 1e-4, 2.0, 7);
  std::vector<double> count(3, 0.0);
  for (auto j : s.indices) count[j] += 1.0;
  EXPECT_NEAR(count[0] / s.size(), 0.5, 0.01);
  EXPECT_NEAR(count[1] / s.size(), 0.25, 0.01);
  EXPECT_NEAR(count[2] / s.size(), 0.25, 0.01);
  EXPECT_EQ(draw_schedule(std::vector<double>{0.5, 0.25, 0.25}, 1e-4, 2.0, 7).indices, s.indices);
  EXPECT_THROW(fixed_schedule(0.5, 1.0, {0}), InvalidArgument);
}

TEST(TimeGrid, ContainsSwitchPointsAndUniformNodes) {
  const auto g = make_time_grid(1.0, 0.3, 11);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 1.0);
  const std::set<double> s(g.begin(), g.end());
  EXPECT_EQ(s.size(), g.size());
  for (double t : {0.3, 0.6, 0.5, 0.7}) EXPECT_TRUE(std::any_of(g.begin(), g.end(), [&](double x) {
    return std::abs(x - t) < 1e-12;
  })) << t;
  EXPECT_EQ(make_time_grid(1.0, 0.0, 201).size(), 201u);
}

TEST(SegmentIndex, ClampedAndLeftClosed) {
  const auto s = fixed_schedule(0.25, 1.0, {0, 1, 0, 1});
  EXPECT_EQ(segment_index(s, 0.0), 1u);
  EXPECT_EQ(segment_index(s, 0.2), 1u);
  EXPECT_EQ(segment_index(s, 0.25), 2u);
  EXPECT_EQ(segment_index(s, 1.0), 4u);
}

TEST(Trajectory, PushEnforcesInvariants) {
  Trajectory t;
  EXPECT_THROW(t.push(0.5, vec({1})), InvalidArgument);
  t.push(0.0, vec({1}));
  EXPECT_THROW(t.push(0.0, vec({1})), InvalidArgument);
  EXPECT_THROW(t.push(0.1, vec({1, 2})), InvalidArgument);
  t.push(0.1, vec({2}));
  EXPECT_EQ(t.size(), 2u);
}

TEST(Scheme, Parsing) {
  EXPECT_EQ(parse_scheme("flow"), Scheme::GradientFlow);
  EXPECT_EQ(parse_scheme("mini-batch"), Scheme::MiniBatchFlow);
  EXPECT_EQ(parse_scheme("minimizing-movement"), Scheme::MinimizingMovement);
  EXPECT_THROW(parse_scheme("sgd"), InvalidArgument);
}

TEST(BatchSystem, ValidationReportsFirstViolation) {
  EXPECT_TRUE(validate_batch_system(BatchSystem(data_with({1. / 3, 1. / 3, 1. / 3}, {{0}, {1}, {2}},
                                                          {1. / 3, 1. / 3, 1. / 3})))
                  .ok());
  EXPECT_EQ(validate_batch_system(BatchSystem(data_with({0.5, 0.3, 0.3}, {{0}, {1}, {2}}, {0.4, 0.3, 0.3}))).violation,
            Violation::WeightSum);
  EXPECT_EQ(validate_batch_system(BatchSystem(data_with({0.5, 0.25, 0.25}, {{0}, {1}, {2}}, {0.5, 0.3, 0.3})))
                .violation,
            Violation::ProbSum);
  EXPECT_EQ(validate_batch_system(BatchSystem(data_with({0.5, 0.5, 0.0}, {{0}, {1}}, {0.5, 0.5}))).violation,
            Violation::UncoveredIndex);
  EXPECT_EQ(validate_batch_system(BatchSystem(data_with({0.5, 0.25, 0.25}, {{0}, {1}, {2}}, {1. / 3, 1. / 3,
                                                                                              1. / 3})))
                .violation,
            Violation::Compatibility);
  EXPECT_EQ(validate_batch_system(BatchSystem(data_with({0.5, 0.25, 0.25}, {{0}, {}, {1, 2}}, {0.5, 0.0, 0.5})))
                .violation,
            Violation::NonpositiveProb);
  EXPECT_THROW(BatchSystem(data_with({1, 0, 0}, {{0, 5}}, {1})), InvalidArgument);
}

TEST(BatchSystem, UnbiasedAtSmoothPoints) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2);
  const auto sys = split_1d();
  for (int k = 0; k < 100; ++k) EXPECT_LE(unbiasedness_residual(sys, vec({u(rng)})), 1e-12);
  // Lambda at u: pi_1 pi_2 |xi_1 - xi_2|^2 for two equally likely batches.
  const auto s = sys.split(vec({2.0}));
  EXPECT_NEAR(variance_lambda(sys, vec({2.0})), 0.25 * (s.xi[0] - s.xi[1]).squaredNorm(), 1e-14);
}

TEST(MiniBatchFlow, ZeroVarianceEqualsGradientFlow) {
  auto q = std::make_shared<QuadraticPotential>(Mat::Identity(2, 2), vec({1, -1}));
  BatchSystemData d;
  d.sub_potentials = {q, q};
  d.weights = {0.5, 0.5};
  d.batches = {{0}, {1}};
  d.batch_probs = {0.5, 0.5};
  const BatchSystem sys(std::move(d));
  const auto nodes = make_time_grid(2.0, 0.1);
  const auto mb = mini_batch_flow(sys, draw_schedule(sys, 0.1, 2.0, 3), vec({2, 2}), nodes);
  const auto gf = gradient_flow(sys.full(), vec({2, 2}), nodes);
  for (std::size_t i = 0; i < nodes.size(); ++i) EXPECT_LT((mb.states[i] - gf.states[i]).norm(), 1e-13);
}

TEST(MiniBatchFlow, SegmentsAreContinuousAndFollowTheirBatch) {
  const auto sys = split_1d();
  const auto sch = fixed_schedule(0.5, 1.0, {1, 0});
  const auto nodes = make_time_grid(1.0, 0.5, 5);
  const auto tr = mini_batch_flow(sys, sch, vec({2.0}), nodes);
  // Batch 2 is 0.5|u|: u = 2 - 0.5 t on [0, 0.5]. Batch 1 is 1/2 u^2 - u:
  // u - 1 = (u(0.5) - 1) e^{-(t - 0.5)} on [0.5, 1].
  const double mid = 2.0 - 0.25;
  EXPECT_NEAR(tr.states[2][0], mid, 1e-14);
  EXPECT_NEAR(tr.final_state()[0], 1.0 + (mid - 1.0) * std::exp(-0.5), 1e-14);
}

TEST(MiniBatchFlow, EnergyOfActiveBatchDecreasesWithinSegments) {
  BatchSystemData d;
  Mat h(2, 2);
  h << 2, 0.5, 0.5, 1;
  auto q = std::make_shared<QuadraticPotential>(h, vec({-1, 1}));
  d.sub_potentials = {q, std::make_shared<L1Potential>(2, 0.8), q};
  d.weights = {0.25, 0.5, 0.25};
  d.batches = {{0, 1}, {1, 2}};
  d.batch_probs = {0.5, 0.5};
  const BatchSystem sys(std::move(d));
  const double eps = 0.1;
  const auto sch = draw_schedule(sys, eps, 1.0, 4);
  const auto nodes = make_time_grid(1.0, eps, 401);
  FlowOptions fo;
  fo.inner_step = 1e-3;
  const auto tr = mini_batch_flow(sys, sch, vec({1.5, -1.0}), nodes, fo);
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const std::size_t k = segment_index(sch, nodes[i - 1]);
    if (nodes[i] > sch.switch_time(k) + 1e-12) continue;  // crosses a switch
    const auto& phi = sys.batch(sch.batch(k));
    EXPECT_LE(phi.value(tr.states[i]), phi.value(tr.states[i - 1]) + 1e-12) << "t=" << nodes[i];
  }
}

TEST(MinimizingMovement, PiecewiseConstantWithLeftLimitAtHorizon) {
  const auto sys = two_quadratics();
  const auto sch = draw_schedule(sys, 0.25, 1.0, 5);
  const auto seq = proximal_sequence(sys, sch, vec({1, 1}));
  ASSERT_EQ(seq.size(), 5u);
  const std::vector<double> nodes{0.0, 0.1, 0.25, 0.6, 1.0};
  const auto tr = minimizing_movement(sys, sch, vec({1, 1}), nodes);
  EXPECT_EQ(tr.states[0], seq[1]);
  EXPECT_EQ(tr.states[1], seq[1]);
  EXPECT_EQ(tr.states[2], seq[2]);
  EXPECT_EQ(tr.states[3], seq[3]);
  EXPECT_EQ(tr.states[4], seq[4]);
  // Each step solves the batch's proximal problem.
  for (std::size_t k = 1; k < seq.size(); ++k) {
    const auto& q = static_cast<const QuadraticPotential&>(sys.batch(sch.batch(k)));
    EXPECT_LT(((seq[k] - seq[k - 1]) / 0.25 + q.gradient(seq[k])).norm(), 1e-12);
  }
}

TEST(PathwiseBound, HoldsForEveryRealization) {
  const auto sys = two_quadratics();
  const double T = 2.0, eps = 0.1;
  const auto nodes = make_time_grid(T, eps);
  const auto ref = gradient_flow(sys.full(), vec({2, -1}), nodes);
  const auto bound = pathwise_bound(sys, ref);
  ASSERT_EQ(bound.size(), nodes.size());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto mb = mini_batch_flow(sys, draw_schedule(sys, eps, T, seed), vec({2, -1}), nodes);
    for (std::size_t i = 0; i < nodes.size(); ++i)
      EXPECT_LE((mb.states[i] - ref.states[i]).norm(), bound[i] + 1e-10) << "seed " << seed << " t " << nodes[i];
  }
}

TEST(FitSlope, RecoversPowerLawAndFlagsDegenerate) {
  const std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
  std::vector<double> err;
  for (double e : eps) err.push_back(3.0 * e * e);
  const auto f = fit_slope(eps, err);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
  EXPECT_NEAR(f.std_err, 0.0, 1e-10);
  EXPECT_FALSE(f.degenerate);
  EXPECT_TRUE(fit_slope(eps, {1.0, 0.5, 0.0, 0.1}).degenerate);
}

TEST(MonteCarlo, ThreadCountDoesNotChangeResults) {
  const auto sys = split_1d();
  const auto model = make_model(sys, vec({2.0}), 1.0, Scheme::MiniBatchFlow);
  MonteCarloOptions a, b;
  a.realizations = b.realizations = 24;
  a.base_seed = b.base_seed = 9;
  a.threads = 1;
  b.threads = 4;
  const auto ca = expectation_error(model, 0.1, a);
  const auto cb = expectation_error(model, 0.1, b);
  EXPECT_EQ(ca.mean_sq, cb.mean_sq);
  EXPECT_EQ(ca.std_err_sq, cb.std_err_sq);
  EXPECT_EQ(ca.sup_mse, cb.sup_mse);
}

TEST(MonteCarlo, RequiresTwoRealizations) {
  const auto model = make_model(split_1d(), vec({2.0}), 1.0, Scheme::MiniBatchFlow);
  MonteCarloOptions o;
  o.realizations = 1;
  EXPECT_THROW(expectation_error(model, 0.1, o), InvalidArgument);
  const auto e = realization_error(model, 0.1, 0);
  EXPECT_FALSE(e.empty());
}

TEST(MonteCarlo, FailuresCarryContext) {
  auto model = make_model(split_1d(), vec({2.0}), 1.0, Scheme::MiniBatchFlow);
  auto inner = model.realize;
  model.realize = [inner](const BatchSchedule& s, const std::vector<double>& nodes) {
    if (s.seed == 13) throw SolverError("did not converge", 0.7);
    return inner(s, nodes);
  };
  MonteCarloOptions o;
  o.realizations = 6;
  o.base_seed = 10;
  try {
    expectation_error(model, 0.1, o);
    FAIL() << "expected RealizationError";
  } catch (const RealizationError& e) {
    EXPECT_EQ(e.cause(), RealizationError::Cause::Solver);
    EXPECT_EQ(e.realization(), 3u);
    EXPECT_EQ(e.seed(), 13u);
    EXPECT_DOUBLE_EQ(e.epsilon(), 0.1);
    ASSERT_TRUE(e.time().has_value());
    EXPECT_DOUBLE_EQ(*e.time(), 0.7);
  }
}

TEST(MonteCarlo, OneDimensionalSplitConvergesAtOrderEpsilon) {
  const auto model = make_model(split_1d(), vec({2.0}), 3.0, Scheme::MiniBatchFlow);
  MonteCarloOptions o;
  o.realizations = 128;
  const auto r = convergence_sweep(model, {0.32, 0.16, 0.08, 0.04, 0.02, 0.01}, o);
  EXPECT_FALSE(r.fit.degenerate);
  EXPECT_GE(r.fit.slope, 0.8);
}

TEST(MonteCarlo, MinimizingMovementOnSmoothQuadratics) {
  const auto model = make_model(two_quadratics(), vec({2, -1}), 3.0, Scheme::MinimizingMovement);
  MonteCarloOptions o;
  o.realizations = 64;
  const auto r = convergence_sweep(model, {0.32, 0.16, 0.08, 0.04, 0.02, 0.01}, o, ErrorMetric::Squared,
                                   Scheme::MinimizingMovement);
  EXPECT_GE(r.fit.slope, 0.8);
}

TEST(MonteCarlo, SweepRejectsBadEpsilonLists) {
  const auto model = make_model(split_1d(), vec({2.0}), 1.0, Scheme::MiniBatchFlow);
  MonteCarloOptions o;
  EXPECT_THROW(convergence_sweep(model, {0.1, 0.05}, o), InvalidArgument);
  EXPECT_THROW(convergence_sweep(model, {0.1, 0.2, 0.05}, o), InvalidArgument);
}

TEST(Evolve, ProximalSubstepsConvergeToExactFlow) {
  Mat h(2, 2);
  h << 2, 0.5, 0.5, 1;
  const QuadraticPotential q(h, vec({1, -1}));
  const Vec exact = q.exact_flow(vec({1, 2}), 1.0);
  FlowOptions fo;
  fo.use_exact = false;
  double prev = INFINITY;
  for (double step : {1e-2, 1e-3, 1e-4}) {
    const double err = (evolve(q, vec({1, 2}), 1.0, step, fo) - exact).norm();
    EXPECT_LT(err, prev / 5);
    prev = err;
  }
  fo.integrator = InnerIntegrator::ExplicitEuler;
  EXPECT_LT((evolve(q, vec({1, 2}), 1.0, 1e-4, fo) - exact).norm(), 1e-3);
}
