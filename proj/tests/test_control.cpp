#include <doctest.h>

#include <cmath>
#include <vector>

#include "jumpbsde/control.hpp"

using namespace jumpbsde;

namespace {

MarketSpec merton_market() {
    MarketSpec market;
    market.b = 0.4;
    market.sigma = 1.0;
    market.alpha = 2.0;
    market.constraint = ConstraintSet::interval(-5.0, 5.0);
    market.claim = ClaimSpec{ClaimSpec::Kind::Constant, 0.0};
    market.horizon = 1.0;
    return market;
}

MarketSpec put_jump_market() {
    MarketSpec market;
    market.b = 0.2;
    market.sigma = 1.0;
    market.alpha = 1.0;
    market.jumps.marks = {1.0};
    market.jumps.intensities = {1.0};
    market.beta = {StepFunction(0.2)};
    market.constraint = ConstraintSet::interval(0.0, 1.0);
    market.claim.kind = ClaimSpec::Kind::Put;
    market.claim.strike = 1.0;
    market.horizon = 0.25;
    return market;
}

struct Solved {
    PathBundle bundle;
    PricePaths prices;
    BsdeSolution solution;
};

Solved solve_market(const MarketSpec& market, std::size_t steps, std::size_t paths,
                    std::uint64_t seed) {
    const TimeGrid grid = TimeGrid::uniform(market.horizon, steps);
    PathBundle bundle = simulate_paths(market, grid, paths, seed);
    PricePaths prices = evolve_price(bundle, market);
    RegressionConfig reg;
    BsdeSolution sol = solve_bsde(bundle, prices, market, market.constraint, reg, {});
    return {std::move(bundle), std::move(prices), std::move(sol)};
}

}  // namespace

TEST_CASE("value function") {
    CHECK(value_function(0.0, 0.0, 1.0) == -1.0);
    CHECK(value_function(-0.04, 0.0, 2.0) ==
          doctest::Approx(-std::exp(-0.08)).epsilon(1e-14));
    // wealth shift scales by exp(-alpha dx)
    const double base = value_function(0.3, 1.0, 1.5);
    const double shifted = value_function(0.3, 1.7, 1.5);
    CHECK(shifted == doctest::Approx(base * std::exp(-1.5 * 0.7)).epsilon(1e-12));
    CHECK(value_function(0.5, 0.0, 2.0) < 0.0);
    CHECK_THROWS_AS(value_function(0.0, 0.0, 0.0), ConfigError);
}

TEST_CASE("optimal strategy reproduces the driver minimizers") {
    const MarketSpec market = put_jump_market();
    const Solved s = solve_market(market, 8, 2000, 51);
    const StrategyPath strategy = optimal_strategy(s.solution, market, market.constraint);
    CHECK(strategy.provenance == StrategyPath::Provenance::Optimal);

    std::vector<double> u(1);
    for (std::size_t i : {0u, 4u, 7u}) {
        const DriverAtStep drv(i, market, market.constraint);
        for (std::size_t p = 0; p < 50; ++p) {
            u[0] = s.solution.u[0].at(i, p);
            const double expected = drv(s.solution.z.at(i, p), u).minimizer;
            CHECK(strategy.values.at(i, p) == expected);
        }
    }
}

TEST_CASE("optimal strategy hits theta over alpha sigma in the Merton case") {
    const MarketSpec market = merton_market();
    const Solved s = solve_market(market, 20, 20000, 53);
    const StrategyPath strategy = optimal_strategy(s.solution, market, market.constraint);
    double mean = 0.0;
    for (std::size_t p = 0; p < 20000; ++p) mean += strategy.values.at(0, p);
    mean /= 20000.0;
    CHECK(std::abs(mean - 0.2) <= 1e-2);
}

TEST_CASE("R process along the optimum has vanishing A") {
    const MarketSpec market = put_jump_market();
    const Solved s = solve_market(market, 10, 4000, 55);
    const StrategyPath strategy = optimal_strategy(s.solution, market, market.constraint);
    const WealthPaths wealth = evolve_wealth(s.bundle, market, strategy.values, 0.0);
    const RProcess r = r_process(strategy, s.solution, wealth, s.bundle, market,
                                 market.constraint);

    double scale = 0.0;
    for (std::size_t p = 0; p < 100; ++p)
        scale = std::max(scale, std::abs(r.r.at(0, p)));
    CHECK(r.max_a_increment <= 1e-9 * std::max(scale, 1.0));
    CHECK(r.min_a_increment >= -1e-12);
    for (std::size_t p = 0; p < 100; ++p) CHECK(r.r.at(5, p) < 0.0);
}

TEST_CASE("A increments are nonnegative for admissible strategies") {
    const MarketSpec market = put_jump_market();
    const Solved s = solve_market(market, 10, 200, 57);

    SubStream stream(59, 0, 0);
    for (int k = 0; k < 100; ++k) {
        const double pi = stream.uniform();  // constant strategy in [0, 1]
        const StrategyPath strategy = constant_strategy(pi, 10, 200, market.constraint);
        const WealthPaths wealth = evolve_wealth(s.bundle, market, strategy.values, 0.0);
        const RProcess r = r_process(strategy, s.solution, wealth, s.bundle, market,
                                     market.constraint);
        CHECK(r.min_a_increment >= -1e-9);
    }

    // a clearly suboptimal constant strategy accrues strictly positive A
    const StrategyPath far = constant_strategy(1.0, 10, 200, market.constraint);
    const WealthPaths wealth = evolve_wealth(s.bundle, market, far.values, 0.0);
    const RProcess r = r_process(far, s.solution, wealth, s.bundle, market,
                                 market.constraint);
    CHECK(r.max_a_increment > 1e-5);
}

TEST_CASE("constant wealth and zero Y give a constant R") {
    MarketSpec market = put_jump_market();
    market.b = 0.0;
    market.claim = ClaimSpec{ClaimSpec::Kind::Constant, 0.0};
    const Solved s = solve_market(market, 8, 1000, 61);
    const StrategyPath zero = constant_strategy(0.0, 8, 1000, market.constraint);
    const WealthPaths wealth = evolve_wealth(s.bundle, market, zero.values, 0.8);
    const RProcess r = r_process(zero, s.solution, wealth, s.bundle, market,
                                 market.constraint);
    const double expected = -std::exp(-market.alpha * 0.8);
    for (std::size_t i = 0; i <= 8; ++i)
        CHECK(r.r.at(i, 0) == doctest::Approx(expected).epsilon(1e-3));
}

TEST_CASE("multiplicative decomposition reconstructs R pathwise") {
    const MarketSpec market = put_jump_market();
    const Solved s = solve_market(market, 16, 500, 63);
    const StrategyPath strategy = constant_strategy(0.6, 16, 500, market.constraint);
    const WealthPaths wealth = evolve_wealth(s.bundle, market, strategy.values, 0.2);
    const RProcess r = r_process(strategy, s.solution, wealth, s.bundle, market,
                                 market.constraint);
    for (std::size_t p = 0; p < 500; ++p) {
        for (std::size_t i = 0; i <= 16; ++i) {
            const double reconstructed =
                r.r.at(0, p) * r.mtilde.at(i, p) * std::exp(r.a.at(i, p) - r.a.at(0, p));
            CHECK(reconstructed ==
                  doctest::Approx(r.r.at(i, p)).epsilon(1e-8));
        }
    }
}

TEST_CASE("inadmissible strategies are rejected") {
    const MarketSpec market = put_jump_market();
    const Solved s = solve_market(market, 4, 50, 65);
    CHECK_THROWS_AS(constant_strategy(2.0, 4, 50, market.constraint), ConfigError);

    StrategyPath bad = constant_strategy(0.5, 4, 50, market.constraint);
    const WealthPaths wealth = evolve_wealth(s.bundle, market, bad.values, 0.0);
    bad.values.at(2, 3) = 7.0;
    CHECK_THROWS_AS(
        r_process(bad, s.solution, wealth, s.bundle, market, market.constraint),
        ConfigError);
}

TEST_CASE("martingale drift test on the Merton instance") {
    const MarketSpec market = merton_market();
    const Solved s = solve_market(market, 20, 20000, 67);
    RegressionConfig reg;

    const StrategyPath opt = optimal_strategy(s.solution, market, market.constraint);
    const WealthPaths w_opt = evolve_wealth(s.bundle, market, opt.values, 0.0);
    const RProcess r_opt = r_process(opt, s.solution, w_opt, s.bundle, market,
                                     market.constraint);
    const MartingaleReport m_opt = martingale_test(r_opt, s.bundle, s.prices, reg);
    CHECK(m_opt.martingale_ok());
    CHECK(m_opt.total_within_band());

    const StrategyPath zero = constant_strategy(0.0, 20, 20000, market.constraint);
    const WealthPaths w0 = evolve_wealth(s.bundle, market, zero.values, 0.0);
    const RProcess r0 = r_process(zero, s.solution, w0, s.bundle, market,
                                  market.constraint);
    const MartingaleReport m0 = martingale_test(r0, s.bundle, s.prices, reg);
    CHECK(m0.supermartingale_ok());
    CHECK(m0.strictly_negative_total());
}

TEST_CASE("exact dichotomy on the oracle tree") {
    const MarketSpec market = put_jump_market();
    const TreeModel tree(market, 3);
    const ActionGrid actions = ActionGrid::uniform(market.constraint, 81);
    const DpSolution dp = dp_value(tree, actions, market.alpha, market.claim, 0.0);
    const TreeDriftReport drift = tree_supermartingale_check(tree, dp, actions.values);
    CHECK(drift.n_nodes > 0);
    CHECK(drift.optimal_ok(1e-9));
    CHECK(drift.suboptimal_ok(1e-9));
}

TEST_CASE("enlarging the constraint set never hurts the tree value") {
    MarketSpec market = put_jump_market();
    const TreeModel tree(market, 3);
    // [0,1] at 41 points is a subset of [-1,1] at 81 points
    const ActionGrid narrow = ActionGrid::uniform(ConstraintSet::interval(0.0, 1.0), 41);
    const ActionGrid wide = ActionGrid::uniform(ConstraintSet::interval(-1.0, 1.0), 81);
    const DpSolution v_narrow = dp_value(tree, narrow, market.alpha, market.claim, 0.0);
    const DpSolution v_wide = dp_value(tree, wide, market.alpha, market.claim, 0.0);
    CHECK(v_wide.value >= v_narrow.value - 1e-14);
}
