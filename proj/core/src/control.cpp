#include "jumpbsde/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jumpbsde {

StrategyPath optimal_strategy(const BsdeSolution& solution, const MarketSpec& spec,
                              const ConstraintSet& constraint) {
    const std::size_t n_steps = solution.z.steps();
    const std::size_t n_paths = solution.z.paths();
    const std::size_t n_marks = solution.u.size();

    StrategyPath out;
    out.provenance = StrategyPath::Provenance::Optimal;
    out.values = PathField(n_steps, n_paths);

    std::vector<double> u_at_path(n_marks);
    for (std::size_t i = 0; i < n_steps; ++i) {
        const DriverAtStep drv(i, spec, constraint);
        for (std::size_t p = 0; p < n_paths; ++p) {
            for (std::size_t j = 0; j < n_marks; ++j) u_at_path[j] = solution.u[j].at(i, p);
            out.values.at(i, p) = drv(solution.z.at(i, p), u_at_path).minimizer;
        }
    }
    return out;
}

StrategyPath constant_strategy(double pi, std::size_t steps, std::size_t paths,
                               const ConstraintSet& constraint) {
    if (!constraint.contains(pi))
        throw ConfigError("strategy: constant value outside the constraint set");
    StrategyPath out;
    out.provenance = StrategyPath::Provenance::UserSupplied;
    out.values = PathField(steps, paths, pi);
    return out;
}

double value_function(double y_t, double x, double alpha) {
    if (!(alpha > 0.0)) throw ConfigError("value: alpha must be > 0");
    return -std::exp(-alpha * (x - y_t));
}

RProcess r_process(const StrategyPath& strategy, const BsdeSolution& solution,
                   const WealthPaths& wealth, const PathBundle& bundle, const MarketSpec& spec,
                   const ConstraintSet& constraint) {
    const std::size_t n_steps = solution.z.steps();
    const std::size_t n_paths = solution.z.paths();
    const std::size_t n_marks = solution.u.size();
    if (strategy.values.steps() != n_steps || strategy.values.paths() != n_paths)
        throw ConfigError("r process: strategy shape must match the solution");
    if (wealth.values.steps() != n_steps + 1 || wealth.values.paths() != n_paths)
        throw ConfigError("r process: wealth shape must match the solution");

    const double alpha = spec.alpha;
    RProcess out;
    out.r = PathField(n_steps + 1, n_paths);
    out.a = PathField(n_steps + 1, n_paths);
    out.mtilde = PathField(n_steps + 1, n_paths, 1.0);
    out.min_a_increment = std::numeric_limits<double>::infinity();
    out.max_a_increment = -std::numeric_limits<double>::infinity();

    std::vector<double> u_at_path(n_marks);
    for (std::size_t p = 0; p < n_paths; ++p)
        out.r.at(0, p) = -std::exp(-alpha * (wealth.values.at(0, p) - solution.y.at(0, p)));

    for (std::size_t i = 0; i < n_steps; ++i) {
        const double dt = bundle.grid().dt(i);
        const DriverAtStep drv(i, spec, constraint);
        for (std::size_t p = 0; p < n_paths; ++p) {
            const double pi = strategy.values.at(i, p);
            if (!constraint.contains(pi))
                throw ConfigError("r process: inadmissible strategy at step " +
                                  std::to_string(i) + ", path " + std::to_string(p));
            for (std::size_t j = 0; j < n_marks; ++j) u_at_path[j] = solution.u[j].at(i, p);
            const double z = solution.z.at(i, p);

            // dA = alpha (objective(pi) - objective(pi*)) dt >= 0, zero at the
            // minimizer.
            const DriverEval opt = drv(z, u_at_path);
            const double gap =
                drv.inner_objective(pi, z, u_at_path) - (opt.quadratic_part + opt.jump_part);
            const double da = alpha * gap * dt;
            out.min_a_increment = std::min(out.min_a_increment, da);
            out.max_a_increment = std::max(out.max_a_increment, da);
            out.a.at(i + 1, p) = out.a.at(i, p) + da;

            const double x_next = wealth.values.at(i + 1, p);
            const double y_next = solution.y.at(i + 1, p);
            out.r.at(i + 1, p) = -std::exp(-alpha * (x_next - y_next));

            // Normalized factor: exactly what is left of the one-step ratio
            // after removing exp(dA).
            const double dx = x_next - wealth.values.at(i, p);
            const double dy = y_next - solution.y.at(i, p);
            const double log_factor = -alpha * (dx - dy) - da;
            out.mtilde.at(i + 1, p) = out.mtilde.at(i, p) * std::exp(log_factor);
        }
    }
    if (n_steps == 0) {
        out.min_a_increment = 0.0;
        out.max_a_increment = 0.0;
    }
    return out;
}

MartingaleReport martingale_test(const RProcess& r, const PathBundle& bundle,
                                 const PricePaths& prices, const RegressionConfig& reg,
                                 double band_sigmas, double bias_allowance_rel) {
    const std::size_t n_steps = bundle.grid().steps();
    const std::size_t n_paths = bundle.n_paths();

    MartingaleReport report;
    report.band_sigmas = band_sigmas;
    report.bias_allowance_rel = bias_allowance_rel;
    report.mean_drift.assign(n_steps, 0.0);
    report.drift_se.assign(n_steps, 0.0);
    report.cond_drift_min.assign(n_steps, 0.0);
    report.cond_drift_max.assign(n_steps, 0.0);

    std::vector<double> increment(n_paths);
    std::vector<double> state(n_paths);
    for (std::size_t i = 0; i < n_steps; ++i) {
        double mean = 0.0;
        double scale = 0.0;
        std::size_t n_inc = 0;
        for (std::size_t p = 0; p < n_paths; ++p) {
            increment[p] = r.r.at(i + 1, p) - r.r.at(i, p);
            if (prices.flagged[p]) continue;
            mean += increment[p];
            scale += std::abs(r.r.at(i, p));
            ++n_inc;
        }
        if (n_inc == 0) continue;
        mean /= static_cast<double>(n_inc);
        scale /= static_cast<double>(n_inc);
        double var = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) {
            if (prices.flagged[p]) continue;
            var += (increment[p] - mean) * (increment[p] - mean);
        }
        var /= static_cast<double>(n_inc);
        const double se = std::sqrt(var / static_cast<double>(n_inc));
        report.mean_drift[i] = mean;
        report.drift_se[i] = se;

        for (std::size_t p = 0; p < n_paths; ++p)
            state[p] = std::log(std::max(prices.values.at(i, p), 1e-300));
        const StateRegression regression(state, reg, static_cast<int>(i), prices.flagged);
        const std::vector<double> fitted = regression.fit(increment, true);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < n_paths; ++p) {
            if (prices.flagged[p]) continue;
            lo = std::min(lo, fitted[p]);
            hi = std::max(hi, fitted[p]);
        }
        report.cond_drift_min[i] = lo;
        report.cond_drift_max[i] = hi;

        const double band = band_sigmas * se + bias_allowance_rel * scale;
        if (mean > band) ++report.steps_above_band;
        if (mean < -band) ++report.steps_below_band;
        if (std::abs(mean) > band) ++report.steps_outside_band;
    }

    // cumulative drift over the whole horizon
    double total_mean = 0.0;
    std::size_t n_inc = 0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        if (prices.flagged[p]) continue;
        total_mean += r.r.at(n_steps, p) - r.r.at(0, p);
        ++n_inc;
    }
    if (n_inc > 0) {
        total_mean /= static_cast<double>(n_inc);
        double var = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) {
            if (prices.flagged[p]) continue;
            const double d = r.r.at(n_steps, p) - r.r.at(0, p) - total_mean;
            var += d * d;
        }
        var /= static_cast<double>(n_inc);
        report.total_drift_mean = total_mean;
        report.total_drift_se = std::sqrt(var / static_cast<double>(n_inc));
    }
    return report;
}

TreeDriftReport tree_supermartingale_check(const TreeModel& tree, const DpSolution& dp,
                                           std::span<const double> constant_actions) {
    const std::size_t depth = tree.depth();
    const std::size_t n_branches = tree.n_branches();
    const double alpha = dp.alpha;

    TreeDriftReport report;
    report.min_suboptimal_gap = std::numeric_limits<double>::infinity();

    for (std::size_t l = 0; l < depth; ++l) {
        for (std::size_t node = 0; node < tree.level_count(l); ++node) {
            report.scale = std::max(report.scale, dp.g[l][node]);
            // optimal action: the conditional sum must reproduce g exactly
            const double a_star = dp.action[l][node];
            double acc = 0.0;
            for (std::size_t br = 0; br < n_branches; ++br)
                acc += tree.branch_prob(br) *
                       std::exp(-alpha * a_star * tree.tradable_increment(l, br)) *
                       dp.g[l + 1][tree.child(node, br)];
            report.worst_optimal_abs_gap =
                std::max(report.worst_optimal_abs_gap, std::abs(acc - dp.g[l][node]));

            for (double a : constant_actions) {
                double s = 0.0;
                for (std::size_t br = 0; br < n_branches; ++br)
                    s += tree.branch_prob(br) *
                         std::exp(-alpha * a * tree.tradable_increment(l, br)) *
                         dp.g[l + 1][tree.child(node, br)];
                report.min_suboptimal_gap =
                    std::min(report.min_suboptimal_gap, s - dp.g[l][node]);
            }
            ++report.n_nodes;
        }
    }
    if (constant_actions.empty()) report.min_suboptimal_gap = 0.0;
    return report;
}

}  // namespace jumpbsde
