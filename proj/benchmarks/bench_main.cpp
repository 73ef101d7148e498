#include <benchmark/benchmark.h>

#include "mbflow/convex/polyhedron.hpp"
#include "mbflow/convex/potentials.hpp"
#include "mbflow/problems/constrained_qp.hpp"
#include "mbflow/problems/obstacle.hpp"
#include "mbflow/problems/sparse.hpp"
#include "mbflow/rng.hpp"

using namespace mbflow;

namespace {

Mat random_spd(Index d, std::uint64_t seed) {
  CounterRng rng(seed, 0);
  Mat b(d, d);
  for (Index i = 0; i < b.size(); ++i) b.data()[i] = 2.0 * rng.uniform(static_cast<std::uint64_t>(i)) - 1.0;
  return b.transpose() * b + Mat::Identity(d, d);
}

void BM_QuadraticExactFlow(benchmark::State& state) {
  const Index d = state.range(0);
  convex::QuadraticPotential q(random_spd(d, 1), Vec::Ones(d));
  const Vec u = Vec::LinSpaced(d, -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(q.exact_flow(u, 0.1));
}
BENCHMARK(BM_QuadraticExactFlow)->Arg(2)->Arg(16)->Arg(64);

void BM_QuadraticProx(benchmark::State& state) {
  const Index d = state.range(0);
  convex::QuadraticPotential q(random_spd(d, 2), Vec::Ones(d));
  const Vec u = Vec::LinSpaced(d, -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(q.prox(u, 0.1));
}
BENCHMARK(BM_QuadraticProx)->Arg(2)->Arg(16)->Arg(64);

void BM_SparseExactSegment(benchmark::State& state) {
  const auto p = problems::example_sparse_problem();
  const Vec u = Vec::Ones(2);
  const int branch = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(problems::exact_mbd_segment(p, branch, u, 0.05));
}
BENCHMARK(BM_SparseExactSegment)->Arg(1)->Arg(2);

void BM_PolyhedronProjection(benchmark::State& state) {
  const auto set = problems::example_feasible_set();
  Vec x(2);
  x << 20.0, 14.0;
  for (auto _ : state) benchmark::DoNotOptimize(set->project(x));
}
BENCHMARK(BM_PolyhedronProjection);

void BM_ObstacleImplicitStep(benchmark::State& state) {
  const problems::Grid2D grid(static_cast<int>(state.range(0)));
  const problems::ObstacleModel model(grid, problems::example_obstacle_spec(grid));
  const Vec u = model.spec().u0;
  for (auto _ : state) benchmark::DoNotOptimize(model.penalized_step(u, 0.01));
}
BENCHMARK(BM_ObstacleImplicitStep)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMicrosecond);

void BM_ObstacleDdStep(benchmark::State& state) {
  const problems::Grid2D grid(20);
  const problems::ObstacleModel model(grid, problems::example_obstacle_spec(grid));
  const Vec u = model.spec().u0;
  std::size_t j = 0;
  for (auto _ : state) benchmark::DoNotOptimize(model.dd_step(u, j++ % 4, 0.01));
}
BENCHMARK(BM_ObstacleDdStep)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
