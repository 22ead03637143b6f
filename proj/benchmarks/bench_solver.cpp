#include <benchmark/benchmark.h>

#include "jumpbsde/bsde_solver.hpp"
#include "jumpbsde/oracle_dp.hpp"

namespace {

using namespace jumpbsde;

MarketSpec jump_market() {
    MarketSpec market;
    market.b = 0.2;
    market.sigma = 1.0;
    market.jumps.marks = {1.0};
    market.jumps.intensities = {1.0};
    market.beta = {StepFunction(0.2)};
    market.alpha = 1.0;
    market.constraint = ConstraintSet::interval(0.0, 1.0);
    market.claim.kind = ClaimSpec::Kind::Put;
    market.claim.strike = 1.0;
    market.horizon = 0.25;
    return market;
}

void BM_SolveBsde(benchmark::State& state) {
    const MarketSpec market = jump_market();
    const TimeGrid grid = TimeGrid::uniform(market.horizon, 12);
    const PathBundle bundle = simulate_paths(market, grid, 4000, 42);
    const PricePaths prices = evolve_price(bundle, market);
    RegressionConfig reg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            solve_bsde(bundle, prices, market, market.constraint, reg, {}));
    }
}
BENCHMARK(BM_SolveBsde);

void BM_TreeDp(benchmark::State& state) {
    const MarketSpec market = jump_market();
    const TreeModel tree(market, 6);
    const ActionGrid actions = ActionGrid::uniform(market.constraint, 81);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dp_value(tree, actions, market.alpha, market.claim, 0.0));
    }
}
BENCHMARK(BM_TreeDp);

}  // namespace
