#include <doctest.h>

#include <cmath>
#include <vector>

#include "jumpbsde/bsde_solver.hpp"
#include "jumpbsde/oracle_dp.hpp"

using namespace jumpbsde;

namespace {

MarketSpec tree_market() {
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

}  // namespace

TEST_CASE("tree structure") {
    const MarketSpec market = tree_market();
    const TreeModel tree(market, 3);

    CHECK(tree.n_branches() == 4);
    CHECK(tree.prob_sum_error() <= 1e-12);
    CHECK(tree.level_count(3) == 64);

    // conditional price-ratio mean is 1 + b dt at every step
    for (std::size_t l = 0; l < 3; ++l) {
        double mean_factor = 0.0;
        for (std::size_t br = 0; br < tree.n_branches(); ++br)
            mean_factor += tree.branch_prob(br) * tree.price_factor(l, br);
        CHECK(mean_factor == doctest::Approx(1.0 + 0.2 * tree.dt()).epsilon(1e-13));
    }

    // total leaf mass is 1
    std::vector<double> prob{1.0};
    for (std::size_t l = 0; l < 3; ++l) {
        std::vector<double> next(tree.level_count(l + 1));
        for (std::size_t node = 0; node < prob.size(); ++node)
            for (std::size_t br = 0; br < tree.n_branches(); ++br)
                next[tree.child(node, br)] = prob[node] * tree.branch_prob(br);
        prob = std::move(next);
    }
    double mass = 0.0;
    for (double p : prob) mass += p;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tree guards") {
    MarketSpec market = tree_market();
    market.jumps.intensities = {16.0};  // n dt = 4/3 at depth 3
    CHECK_THROWS_AS(TreeModel(market, 3), ConfigError);

    MarketSpec negative = tree_market();
    negative.sigma = 4.0;  // 1 + b dt - sigma sqrt(dt) < 0 at depth 3
    CHECK_THROWS_AS(TreeModel(negative, 3), ConfigError);
}

TEST_CASE("action grid") {
    const ConstraintSet c = ConstraintSet::interval(0.0, 1.0);
    const ActionGrid g = ActionGrid::uniform(c, 41);
    CHECK(g.values.size() == 41);
    CHECK(g.values.front() == 0.0);
    CHECK(g.values.back() == 1.0);
    CHECK(g.spacing() == doctest::Approx(1.0 / 40.0));
    for (double v : g.values) CHECK(c.contains(v));
    CHECK_THROWS_AS(ActionGrid::uniform(ConstraintSet::half_line_up(0.0), 5), ConfigError);
}

TEST_CASE("dp: symmetric single step prefers no position") {
    MarketSpec market;
    market.b = 0.0;
    market.sigma = 0.5;
    market.alpha = 1.3;
    market.constraint = ConstraintSet::interval(-1.0, 1.0);
    market.claim = ClaimSpec{ClaimSpec::Kind::Constant, 0.0};
    market.horizon = 1.0;
    const TreeModel tree(market, 1);
    const ActionGrid actions = ActionGrid::uniform(market.constraint, 41);
    const DpSolution dp = dp_value(tree, actions, market.alpha, market.claim, 0.3);
    CHECK(dp.action[0][0] == 0.0);
    CHECK(dp.value == doctest::Approx(-std::exp(-1.3 * 0.3)).epsilon(1e-12));
    CHECK(dp.y0 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dp: cash claim scales the value by exp(alpha c)") {
    const MarketSpec market = tree_market();
    const TreeModel tree(market, 3);
    const ActionGrid actions = ActionGrid::uniform(market.constraint, 41);

    ClaimSpec zero{ClaimSpec::Kind::Constant, 0.0};
    ClaimSpec shifted{ClaimSpec::Kind::Constant, 0.37};
    const DpSolution v0 = dp_value(tree, actions, market.alpha, zero, 0.0);
    const DpSolution vc = dp_value(tree, actions, market.alpha, shifted, 0.0);
    CHECK(vc.value ==
          doctest::Approx(v0.value * std::exp(market.alpha * 0.37)).epsilon(1e-12));
}

TEST_CASE("dp: refining the action grid never decreases the value") {
    const MarketSpec market = tree_market();
    const TreeModel tree(market, 3);
    const ActionGrid coarse = ActionGrid::uniform(market.constraint, 41);
    const ActionGrid fine = ActionGrid::uniform(market.constraint, 81);  // superset
    const DpSolution vc = dp_value(tree, coarse, market.alpha, market.claim, 0.0);
    const DpSolution vf = dp_value(tree, fine, market.alpha, market.claim, 0.0);
    CHECK(vf.value >= vc.value - 1e-14);
    CHECK(std::abs(vf.value - vc.value) <= 1e-3);  // grid-resolution effect only
}

TEST_CASE("tree bsde: constant claim with zero theta is constant") {
    MarketSpec market = tree_market();
    market.b = 0.0;
    market.claim = ClaimSpec{ClaimSpec::Kind::Constant, 0.45};
    const TreeModel tree(market, 4);
    const TreeBsdeSolution tb = tree_bsde(tree, market, market.constraint, market.claim);
    for (std::size_t l = 0; l <= 4; ++l)
        for (std::size_t node = 0; node < tree.level_count(l); ++node)
            CHECK(tb.y[l][node] == doctest::Approx(0.45).epsilon(1e-12));
    for (std::size_t node = 0; node < tree.level_count(2); ++node) {
        CHECK(std::abs(tb.z[2][node]) <= 1e-12);
        CHECK(std::abs(tb.u_at(2, node, 0)) <= 1e-12);
    }
}

TEST_CASE("tree bsde: Merton parameters approach the closed form in depth") {
    MarketSpec market;
    market.b = 0.4;
    market.sigma = 1.0;
    market.alpha = 2.0;
    market.constraint = ConstraintSet::interval(-5.0, 5.0);
    market.claim = ClaimSpec{ClaimSpec::Kind::Constant, 0.0};
    market.horizon = 0.5;
    const double closed = -0.4 * 0.4 * 0.5 / (2.0 * 2.0);

    double prev_err = 1e300;
    for (std::size_t depth : {2u, 4u, 8u}) {
        const TreeModel tree(market, depth);
        const TreeBsdeSolution tb = tree_bsde(tree, market, market.constraint, market.claim);
        const double err = std::abs(tb.y[0][0] - closed);
        CHECK(err <= prev_err + 1e-12);
        prev_err = err;
    }
    CHECK(prev_err <= 5e-3);
}

TEST_CASE("theorem identity: dp value equals the tree-BSDE exponential") {
    const MarketSpec market = tree_market();
    const TreeModel tree(market, 3);
    const ActionGrid actions = ActionGrid::uniform(market.constraint, 81);
    const DpSolution dp = dp_value(tree, actions, market.alpha, market.claim, 0.0);
    const TreeBsdeSolution tb = tree_bsde(tree, market, market.constraint, market.claim);
    const double v_bsde = -std::exp(-market.alpha * (0.0 - tb.y[0][0]));
    CHECK(std::abs(dp.value - v_bsde) <= 1e-2);
}

TEST_CASE("Monte Carlo solver agrees with the tree on matched parameters") {
    const MarketSpec market = tree_market();
    const TreeModel tree(market, 3);
    const TreeBsdeSolution tb = tree_bsde(tree, market, market.constraint, market.claim);

    const TimeGrid grid = TimeGrid::uniform(market.horizon, 3);
    const PathBundle bundle = simulate_paths(market, grid, 50000, 101);
    const PricePaths prices = evolve_price(bundle, market);
    RegressionConfig reg;
    const BsdeSolution sol = solve_bsde(bundle, prices, market, market.constraint, reg, {});
    CHECK(std::abs(sol.y0_mean() - tb.y[0][0]) <= 1e-2);
}

TEST_CASE("compare guards and self-comparison") {
    const OperatingPoint a{2.0, 1.0, -0.04, 0.2, 0.0};
    const CompareReport self = compare(a, a, {});
    CHECK(self.pass);
    CHECK(self.v_gap == 0.0);
    CHECK(self.y0_gap == 0.0);
    CHECK(self.pi0_gap == 0.0);

    OperatingPoint b = a;
    b.alpha = 1.0;
    CHECK_THROWS_AS(compare(a, b, {}), ConfigError);

    OperatingPoint c = a;
    c.y0 = -0.02;
    const CompareReport gap = compare(c, a, {});
    CHECK(gap.y0_gap == doctest::Approx(0.02));
}
