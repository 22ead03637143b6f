#include <benchmark/benchmark.h>

#include "jumpbsde/levy_market.hpp"

namespace {

using namespace jumpbsde;

MarketSpec jump_market() {
    MarketSpec market;
    market.b = 0.2;
    market.sigma = 1.0;
    market.jumps.marks = {1.0};
    market.jumps.intensities = {1.0};
    market.beta = {StepFunction(0.2)};
    market.alpha = 2.0;
    market.constraint = ConstraintSet::interval(0.0, 1.0);
    market.horizon = 1.0;
    return market;
}

void BM_SimulatePaths(benchmark::State& state) {
    const MarketSpec market = jump_market();
    const TimeGrid grid = TimeGrid::uniform(1.0, 50);
    const std::size_t paths = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate_paths(market, grid, paths, 42));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(paths) * 50);
}
BENCHMARK(BM_SimulatePaths)->Arg(1000)->Arg(10000);

void BM_EvolvePrice(benchmark::State& state) {
    const MarketSpec market = jump_market();
    const TimeGrid grid = TimeGrid::uniform(1.0, 50);
    const PathBundle bundle = simulate_paths(market, grid, 10000, 42);
    for (auto _ : state) {
        benchmark::DoNotOptimize(evolve_price(bundle, market));
    }
}
BENCHMARK(BM_EvolvePrice);

}  // namespace
