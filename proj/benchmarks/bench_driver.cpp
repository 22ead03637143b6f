#include <benchmark/benchmark.h>

#include "jumpbsde/driver.hpp"

namespace {

using namespace jumpbsde;

MarketSpec jump_market() {
    MarketSpec market;
    market.b = 0.2;
    market.sigma = 1.0;
    market.jumps.marks = {1.0, -0.5};
    market.jumps.intensities = {1.0, 0.5};
    market.beta = {StepFunction(0.2), StepFunction(-0.3)};
    market.alpha = 2.0;
    market.constraint = ConstraintSet::interval(-5.0, 5.0);
    market.horizon = 1.0;
    return market;
}

void BM_DriverEval(benchmark::State& state) {
    const MarketSpec market = jump_market();
    const DriverAtStep drv(0, market, market.constraint);
    const std::vector<double> u = {0.3, -0.2};
    double z = -1.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(drv(z, u).value);
        z = z < 1.0 ? z + 1e-3 : -1.0;
    }
}
BENCHMARK(BM_DriverEval);

void BM_DriverTruncated(benchmark::State& state) {
    const MarketSpec market = jump_market();
    const DriverAtStep drv =
        DriverAtStep::truncated(truncation_floor(market) + 1.0, 0, market, market.constraint);
    const std::vector<double> u = {0.3, -0.2};
    double z = -1.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(drv(z, u).value);
        z = z < 1.0 ? z + 1e-3 : -1.0;
    }
}
BENCHMARK(BM_DriverTruncated);

void BM_GammaCoefficient(benchmark::State& state) {
    const MarketSpec market = jump_market();
    const std::vector<double> u = {0.3, -0.2};
    const std::vector<double> u_prime = {-0.1, 0.4};
    const std::vector<double> beta = {0.2, -0.3};
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            gamma_coefficient(market.alpha, u, u_prime, beta, market.constraint, market.jumps));
    }
}
BENCHMARK(BM_GammaCoefficient);

}  // namespace
