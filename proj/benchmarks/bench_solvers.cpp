#include "modplan/bnb.hpp"
#include "modplan/formulation.hpp"
#include "modplan/generators.hpp"
#include "modplan/qp.hpp"
#include "modplan/slicing.hpp"

#include <benchmark/benchmark.h>

using namespace modplan;

namespace {

Scenario square(int obstacles, int horizon) {
  GeneratorParams p;
  p.obstacles = obstacles;
  p.horizon = horizon;
  return generate(p);
}

BnbConfig group_side() {
  BnbConfig c;
  c.branching = BranchingRule::GroupSide;
  return c;
}

}  // namespace

// Root relaxation of the full MIQP: binaries relaxed to [0,1].
void BM_RootRelaxation(benchmark::State& state) {
  const auto built = build(square(static_cast<int>(state.range(0)), static_cast<int>(state.range(1))));
  QpSolver solver;
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(built.problem.qp));
  state.counters["vars"] = built.layout.total;
}
BENCHMARK(BM_RootRelaxation)->Args({4, 8})->Args({9, 12})->Args({16, 16})->Unit(benchmark::kMillisecond);

void BM_BranchAndBound(benchmark::State& state) {
  const auto built = build(square(static_cast<int>(state.range(0)), static_cast<int>(state.range(1))));
  BnbConfig c = group_side();
  if (state.range(2) == 0) c.branching = BranchingRule::MostFractional;
  long nodes = 0;
  for (auto _ : state) {
    const auto r = solve_miqp(built.problem, c);
    nodes = r.nodes;
    benchmark::DoNotOptimize(r.value);
  }
  state.counters["nodes"] = static_cast<double>(nodes);
}
BENCHMARK(BM_BranchAndBound)->Args({4, 8, 0})->Args({4, 8, 1})->Args({9, 10, 1})->Unit(benchmark::kMillisecond);

void BM_Sliced(benchmark::State& state) {
  const Scenario s = square(9, 12);
  const int m = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(solve_sliced(s, m, group_side()).solution.cost.total);
}
BENCHMARK(BM_Sliced)->DenseRange(1, 4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
