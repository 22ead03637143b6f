#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "jumpbsde/bsde_solver.hpp"
#include "jumpbsde/levy_market.hpp"
#include "jumpbsde/oracle_dp.hpp"

namespace jumpbsde {

struct StrategyPath {
    enum class Provenance { Optimal, UserSupplied };

    PathField values;  // steps x paths
    Provenance provenance = Provenance::UserSupplied;
};

/// Per step and path, the minimizer of the driver objective at the solved
/// (Z, U); the deterministic smallest-pi tie-break realizes a measurable
/// selection.
StrategyPath optimal_strategy(const BsdeSolution& solution, const MarketSpec& spec,
                              const ConstraintSet& constraint);

/// Constant admissible strategy (validated against the constraint set).
StrategyPath constant_strategy(double pi, std::size_t steps, std::size_t paths,
                               const ConstraintSet& constraint);

/// V_t(x) = -exp(-alpha (x - Y_t)).
double value_function(double y_t, double x, double alpha);

/// R^pi = -exp(-alpha(X^pi - Y)) with its multiplicative split
/// R_s = R_t * Mtilde_{t,s} * exp(A_s - A_t): A collects the nonnegative
/// compensator increments (zero along the optimal strategy), Mtilde the
/// normalized exponential-martingale factor.
struct RProcess {
    PathField r;       // (steps + 1) x paths, strictly negative
    PathField a;       // cumulative finite-variation exponent, A_0 = 0
    PathField mtilde;  // normalized factor, Mtilde_0 = 1
    double min_a_increment = 0.0;
    double max_a_increment = 0.0;
};

RProcess r_process(const StrategyPath& strategy, const BsdeSolution& solution,
                   const WealthPaths& wealth, const PathBundle& bundle, const MarketSpec& spec,
                   const ConstraintSet& constraint);

/// Regression-based drift test of R: supermartingale for admissible
/// strategies, martingale along the optimum, judged against CLT bands.
///
/// The drift of R built from an estimated Y carries the estimate's bias,
/// which does not shrink with the path count; bias_allowance_rel widens the
/// per-step band by that fraction of the local |R| scale so the test flags
/// structural violations rather than scheme resolution.
struct MartingaleReport {
    std::vector<double> mean_drift;  // per step, mean(R_{i+1} - R_i)
    std::vector<double> drift_se;
    std::vector<double> cond_drift_min;  // fitted conditional drift extremes
    std::vector<double> cond_drift_max;
    double band_sigmas = 4.0;
    double bias_allowance_rel = 0.0;
    std::size_t steps_above_band = 0;    // drift significantly positive
    std::size_t steps_below_band = 0;    // drift significantly negative
    std::size_t steps_outside_band = 0;  // |drift| significant
    double total_drift_mean = 0.0;       // mean(R_N - R_0)
    double total_drift_se = 0.0;

    bool supermartingale_ok() const { return steps_above_band == 0; }
    bool martingale_ok() const { return steps_outside_band == 0; }
    /// Cumulative drift over the horizon is significantly negative.
    bool strictly_negative_total() const {
        return total_drift_mean < -band_sigmas * total_drift_se;
    }
    bool total_within_band() const {
        return std::abs(total_drift_mean) <= band_sigmas * total_drift_se;
    }
};

MartingaleReport martingale_test(const RProcess& r, const PathBundle& bundle,
                                 const PricePaths& prices, const RegressionConfig& reg,
                                 double band_sigmas = 4.0, double bias_allowance_rel = 0.0);

/// Exact supermartingale dichotomy on a scenario tree: conditional drifts of
/// R are computed as finite sums against the dynamic-programming solution.
/// Gaps are in units of g = exp(alpha Y); drift of R has the opposite sign.
struct TreeDriftReport {
    double scale = 0.0;                  // max node g
    double worst_optimal_abs_gap = 0.0;  // |E[...] - g| along optimal actions
    double min_suboptimal_gap = 0.0;     // most negative gap over tested actions
    std::size_t n_nodes = 0;

    bool optimal_ok(double rel_tol) const { return worst_optimal_abs_gap <= rel_tol * scale; }
    bool suboptimal_ok(double rel_tol) const { return min_suboptimal_gap >= -rel_tol * scale; }
};

TreeDriftReport tree_supermartingale_check(const TreeModel& tree, const DpSolution& dp,
                                           std::span<const double> constant_actions);

}  // namespace jumpbsde
