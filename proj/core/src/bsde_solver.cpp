#include "jumpbsde/bsde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jumpbsde {

namespace {

double mean_over_included(std::span<const double> row, std::span<const std::uint8_t> flagged) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < row.size(); ++p) {
        if (!flagged.empty() && flagged[p]) continue;
        s += row[p];
        ++n;
    }
    return n == 0 ? 0.0 : s / static_cast<double>(n);
}

}  // namespace

APrioriBounds a_priori_bounds(const MarketSpec& spec) {
    spec.claim.validate();
    const double b_inf = spec.claim.sup_abs();
    if (!std::isfinite(b_inf)) throw ConfigError("bounds: claim must be bounded");
    const double th = spec.theta_sup();
    APrioriBounds out;
    out.c1 = -b_inf - th * th * spec.horizon / (2.0 * spec.alpha);
    out.c2 = b_inf;
    const double spread = 2.0 * b_inf + th * th * spec.horizon / (2.0 * spec.alpha);
    out.c3_estimate = 4.0 * spread * spread;
    return out;
}

double BsdeSolution::y0_mean() const {
    return mean_over_included(y.row(0), flagged);
}

double BsdeSolution::max_abs_y() const {
    return std::max(std::abs(diagnostics.min_y), std::abs(diagnostics.max_y));
}

BsdeSolution solve_bsde(const PathBundle& bundle, const PricePaths& prices,
                        const MarketSpec& spec, const ConstraintSet& constraint,
                        const RegressionConfig& reg, const SolveMode& mode) {
    spec.validate();
    reg.validate();
    const std::size_t n_steps = bundle.grid().steps();
    const std::size_t n_paths = bundle.n_paths();
    const std::size_t n_marks = bundle.n_marks();
    if (prices.values.steps() != n_steps + 1 || prices.values.paths() != n_paths)
        throw ConfigError("solve: prices do not match the bundle");

    BsdeSolution sol;
    sol.grid = bundle.grid();
    sol.flagged = prices.flagged;
    sol.bounds = a_priori_bounds(spec);
    sol.y = PathField(n_steps + 1, n_paths);
    sol.z = PathField(n_steps, n_paths);
    sol.u.assign(n_marks, PathField(n_steps, n_paths));
    sol.residual_rms.assign(n_steps, 0.0);
    sol.diagnostics.flagged_paths = prices.flagged_count;

    // terminal condition, exact pathwise
    for (std::size_t p = 0; p < n_paths; ++p)
        sol.y.at(n_steps, p) = spec.claim(prices.values.at(n_steps, p));

    const double theta_sup = spec.theta_sup();
    const double drift_scale = 1.0 + theta_sup * theta_sup / (2.0 * spec.alpha);

    double min_y = std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < n_paths; ++p) {
        if (sol.flagged[p]) continue;
        min_y = std::min(min_y, sol.y.at(n_steps, p));
        max_y = std::max(max_y, sol.y.at(n_steps, p));
    }

    std::vector<double> state(n_paths);
    std::vector<double> target(n_paths);
    std::vector<double> u_at_path(n_marks);

    for (std::size_t i = n_steps; i-- > 0;) {
        const double dt = bundle.grid().dt(i);
        for (std::size_t p = 0; p < n_paths; ++p)
            state[p] = std::log(std::max(prices.values.at(i, p), 1e-300));

        const StateRegression regression(state, reg, static_cast<int>(i), sol.flagged);
        const auto y_next = sol.y.row(i + 1);

        const std::vector<double> e_hat = regression.fit(y_next, true);
        sol.residual_rms[i] = regression.residual_rms(y_next, e_hat);
        sol.diagnostics.max_residual_rms =
            std::max(sol.diagnostics.max_residual_rms, sol.residual_rms[i]);

        for (std::size_t p = 0; p < n_paths; ++p) target[p] = y_next[p] * bundle.dw(i, p);
        const std::vector<double> z_fit = regression.fit(target);
        for (std::size_t p = 0; p < n_paths; ++p) sol.z.at(i, p) = z_fit[p] / dt;

        const DriverAtStep drv = mode.truncated
                                     ? DriverAtStep::truncated(mode.level, i, spec, constraint)
                                     : DriverAtStep(i, spec, constraint);

        const double tol = 3.0 * sol.residual_rms[i] + drift_scale * dt;
        sol.diagnostics.max_clamp_tol = std::max(sol.diagnostics.max_clamp_tol, tol);
        const double lo = sol.bounds.c1 - tol;
        const double hi = sol.bounds.c2 + tol;

        // Jump components carry the bound |U_i| <= 2 max_p |Y_{i+1,p}| (the
        // projection of Y_{i+1} dN~ cannot exceed it); regression tails can
        // stray far outside (the fit is divided by n_j dt), and an outlier
        // inside the exponential driver destabilizes the step, so U is
        // clamped like Y, with the pre-clamp excess recorded.
        double y_next_sup = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p)
            if (!sol.flagged[p]) y_next_sup = std::max(y_next_sup, std::abs(y_next[p]));
        const double u_bound = 2.0 * y_next_sup + tol;
        sol.diagnostics.u_clamp_bound = std::max(sol.diagnostics.u_clamp_bound, u_bound);
        for (std::size_t j = 0; j < n_marks; ++j) {
            const double intensity = spec.jumps.intensities[j];
            for (std::size_t p = 0; p < n_paths; ++p)
                target[p] = y_next[p] * bundle.compensated_dn(i, j, p, intensity);
            const std::vector<double> u_fit = regression.fit(target);
            for (std::size_t p = 0; p < n_paths; ++p) {
                const double u_raw = u_fit[p] / (intensity * dt);
                if (!sol.flagged[p])
                    sol.diagnostics.preclamp_u_excess = std::max(
                        sol.diagnostics.preclamp_u_excess, std::abs(u_raw) - u_bound);
                sol.u[j].at(i, p) = std::clamp(u_raw, -u_bound, u_bound);
            }
        }

        for (std::size_t p = 0; p < n_paths; ++p) {
            for (std::size_t j = 0; j < n_marks; ++j) u_at_path[j] = sol.u[j].at(i, p);
            const double f = drv(sol.z.at(i, p), u_at_path).value;
            const double y_pre = e_hat[p] + f * dt;
            if (!sol.flagged[p]) {
                if (y_pre > sol.bounds.c2)
                    sol.diagnostics.preclamp_excess_high =
                        std::max(sol.diagnostics.preclamp_excess_high, y_pre - sol.bounds.c2);
                if (y_pre < sol.bounds.c1)
                    sol.diagnostics.preclamp_excess_low =
                        std::max(sol.diagnostics.preclamp_excess_low, sol.bounds.c1 - y_pre);
                if (y_pre > hi || y_pre < lo) sol.diagnostics.bounds_ok = false;
                for (std::size_t j = 0; j < n_marks; ++j)
                    sol.diagnostics.max_abs_u =
                        std::max(sol.diagnostics.max_abs_u, std::abs(u_at_path[j]));
            }
            const double y_clamped = std::clamp(y_pre, lo, hi);
            sol.y.at(i, p) = y_clamped;
            if (!sol.flagged[p]) {
                min_y = std::min(min_y, y_clamped);
                max_y = std::max(max_y, y_clamped);
            }
        }
    }

    sol.diagnostics.min_y = min_y;
    sol.diagnostics.max_y = max_y;
    return sol;
}

namespace {

struct LevelDistances {
    double y_gap_sup;
    double z_dist;
    double u_dist;
};

LevelDistances distances_vs_last(const BsdeSolution& a, const BsdeSolution& b,
                                 const MarketSpec& spec) {
    const std::size_t n_steps = a.z.steps();
    const std::size_t n_paths = a.z.paths();
    double y_gap_sup = 0.0;
    double z_acc = 0.0;
    double u_acc = 0.0;
    std::size_t n_inc = 0;
    for (std::size_t p = 0; p < n_paths; ++p)
        if (!a.flagged[p]) ++n_inc;
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double dt = a.grid.dt(i);
        double y_gap = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) {
            if (a.flagged[p]) continue;
            y_gap += std::abs(a.y.at(i, p) - b.y.at(i, p));
            const double dz = a.z.at(i, p) - b.z.at(i, p);
            z_acc += dz * dz * dt;
            for (std::size_t j = 0; j < a.u.size(); ++j) {
                const double du = a.u[j].at(i, p) - b.u[j].at(i, p);
                u_acc += du * du * spec.jumps.intensities[j] * dt;
            }
        }
        y_gap_sup = std::max(y_gap_sup, y_gap / static_cast<double>(std::max<std::size_t>(n_inc, 1)));
    }
    const double denom = static_cast<double>(std::max<std::size_t>(n_inc, 1));
    return {y_gap_sup, std::sqrt(z_acc / denom), std::sqrt(u_acc / denom)};
}

}  // namespace

LadderResult solve_sequence(LadderMode mode, std::span<const double> m_values,
                            const PathBundle& bundle, const PricePaths& prices,
                            const MarketSpec& spec, const ConstraintSet& constraint,
                            const RegressionConfig& reg) {
    if (m_values.empty()) throw ConfigError("ladder: needs at least one level");
    for (std::size_t k = 0; k + 1 < m_values.size(); ++k)
        if (!(m_values[k] < m_values[k + 1]))
            throw ConfigError("ladder: levels must strictly increase");

    LadderResult out;
    out.report.mode = mode;
    out.report.levels.assign(m_values.begin(), m_values.end());

    for (double m : m_values) {
        if (mode == LadderMode::CompactTruncation) {
            SolveMode sm;
            sm.truncated = true;
            sm.level = m;
            out.solutions.push_back(solve_bsde(bundle, prices, spec, constraint, reg, sm));
        } else {
            const ConstraintSet truncated = constraint.truncate(m);
            out.solutions.push_back(solve_bsde(bundle, prices, spec, truncated, reg, {}));
        }
    }

    const BsdeSolution& last = out.solutions.back();
    const std::size_t n_steps = last.z.steps();
    const std::size_t n_paths = last.z.paths();

    for (const BsdeSolution& sol : out.solutions) {
        out.report.y0_mean.push_back(sol.y0_mean());
        const LevelDistances d = distances_vs_last(sol, last, spec);
        out.report.y_gap_sup.push_back(d.y_gap_sup);
        out.report.z_dist_l2.push_back(d.z_dist);
        out.report.u_dist_l2.push_back(d.u_dist);
    }

    // Monotonicity across consecutive levels: Y nondecreasing in m for the
    // f^m ladder, nonincreasing for the growing-constraint ladder.
    const double sign = mode == LadderMode::CompactTruncation ? 1.0 : -1.0;
    for (std::size_t l = 0; l + 1 < out.solutions.size(); ++l) {
        const BsdeSolution& low = out.solutions[l];
        const BsdeSolution& high = out.solutions[l + 1];
        for (std::size_t i = 0; i <= n_steps; ++i) {
            double mean_gap = 0.0;
            std::size_t n_inc = 0;
            for (std::size_t p = 0; p < n_paths; ++p) {
                if (low.flagged[p]) continue;
                const double gap = sign * (low.y.at(i, p) - high.y.at(i, p));
                out.report.worst_pathwise_violation =
                    std::max(out.report.worst_pathwise_violation, gap);
                mean_gap += gap;
                ++n_inc;
            }
            if (n_inc > 0) {
                mean_gap /= static_cast<double>(n_inc);
                out.report.worst_mean_violation =
                    std::max(out.report.worst_mean_violation, mean_gap);
            }
        }
    }
    return out;
}

BmoReport bmo_diagnostic(const BsdeSolution& solution, const PricePaths& prices,
                         const MarketSpec& spec, const RegressionConfig& reg) {
    const std::size_t n_steps = solution.z.steps();
    const std::size_t n_paths = solution.z.paths();

    BmoReport report;
    report.c3_estimate = solution.bounds.c3_estimate;
    report.step_max_tail.assign(n_steps, 0.0);

    // pathwise tails, accumulated backward
    std::vector<double> tail(n_paths, 0.0);
    std::vector<std::vector<double>> tails(n_steps);
    for (std::size_t i = n_steps; i-- > 0;) {
        const double dt = solution.grid.dt(i);
        for (std::size_t p = 0; p < n_paths; ++p) {
            double quad = solution.z.at(i, p) * solution.z.at(i, p);
            for (std::size_t j = 0; j < solution.u.size(); ++j)
                quad += solution.u[j].at(i, p) * solution.u[j].at(i, p) *
                        spec.jumps.intensities[j];
            tail[p] += quad * dt;
        }
        tails[i] = tail;
    }

    std::vector<double> state(n_paths);
    for (std::size_t i = 0; i < n_steps; ++i) {
        for (std::size_t p = 0; p < n_paths; ++p)
            state[p] = std::log(std::max(prices.values.at(i, p), 1e-300));
        const StateRegression regression(state, reg, static_cast<int>(i), solution.flagged);
        const std::vector<double> fitted = regression.fit(tails[i], true);
        double worst = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) {
            if (solution.flagged[p]) continue;
            worst = std::max(worst, fitted[p]);
        }
        report.step_max_tail[i] = worst;
        if (worst > report.c3_estimate) ++report.steps_exceeding;
    }
    return report;
}

NormEquivalenceReport norm_equivalence_check(const BsdeSolution& solution,
                                             const MarketSpec& spec) {
    NormEquivalenceReport report;
    report.k_y = 2.0 * solution.max_abs_y();

    double max_abs_u = 0.0;
    const std::size_t n_steps = solution.z.steps();
    const std::size_t n_paths = solution.z.paths();
    for (std::size_t j = 0; j < solution.u.size(); ++j)
        for (std::size_t i = 0; i < n_steps; ++i)
            for (std::size_t p = 0; p < n_paths; ++p)
                if (!solution.flagged[p])
                    max_abs_u = std::max(max_abs_u, std::abs(solution.u[j].at(i, p)));

    report.u_bound_excess = std::max(0.0, max_abs_u - report.k_y);
    report.k_used = std::max(report.k_y, max_abs_u);

    const double alpha = spec.alpha;
    const double k = report.k_used;
    if (k > 0.0) {
        const double lo_ratio = g_alpha(alpha, -k) / (k * k);
        const double hi_ratio = g_alpha(alpha, k) / (k * k);
        report.c_lower = std::min({lo_ratio, hi_ratio, 0.5 * alpha});
        report.c_upper = std::max({lo_ratio, hi_ratio, 0.5 * alpha});
    } else {
        report.c_lower = report.c_upper = 0.5 * alpha;
    }

    report.worst_lower_margin = std::numeric_limits<double>::infinity();
    report.worst_upper_margin = std::numeric_limits<double>::infinity();

    std::vector<double> u_at_path(solution.u.size());
    for (std::size_t i = 0; i < n_steps; ++i) {
        for (std::size_t p = 0; p < n_paths; ++p) {
            if (solution.flagged[p]) continue;
            double l2 = 0.0;
            double penalty = 0.0;
            for (std::size_t j = 0; j < solution.u.size(); ++j) {
                const double uj = solution.u[j].at(i, p);
                l2 += uj * uj * spec.jumps.intensities[j];
                penalty += g_alpha(alpha, uj) * spec.jumps.intensities[j];
            }
            const double slack =
                1e-12 * std::max({1.0, penalty, report.c_upper * l2});
            const double lower_margin = penalty - report.c_lower * l2;
            const double upper_margin = report.c_upper * l2 - penalty;
            if (lower_margin < -slack || upper_margin < -slack) ++report.violations;
            report.worst_lower_margin = std::min(report.worst_lower_margin, lower_margin);
            report.worst_upper_margin = std::min(report.worst_upper_margin, upper_margin);
            ++report.n_checked;
        }
    }
    if (report.n_checked == 0) {
        report.worst_lower_margin = 0.0;
        report.worst_upper_margin = 0.0;
    }
    return report;
}

LipschitzBoundReport lipschitz_bound_diagnostic(const BsdeSolution& solution,
                                                const PricePaths& prices,
                                                const MarketSpec& spec,
                                                const ConstraintSet& constraint,
                                                const RegressionConfig& reg, double m,
                                                double c0) {
    if (!(c0 > 0.0)) throw ConfigError("lipschitz diagnostic: C0 must be > 0");
    LipschitzBoundReport report;
    report.lipschitz_constant = truncated_lipschitz_constant(spec, constraint, m);
    const double l = report.lipschitz_constant;
    report.log_k_factor = std::log(c0) + 4.0 * l * l * spec.horizon;

    const std::size_t n_steps = solution.z.steps();
    const std::size_t n_paths = solution.z.paths();

    // deterministic part: int_t^T |f^m(s, 0, 0)| ds on the grid
    std::vector<double> f0_tail(n_steps + 1, 0.0);
    const std::vector<double> no_u(spec.jumps.count(), 0.0);
    for (std::size_t i = n_steps; i-- > 0;) {
        const double f0 = DriverAtStep::truncated(m, i, spec, constraint)(0.0, no_u).value;
        f0_tail[i] = f0_tail[i + 1] + std::abs(f0) * solution.grid.dt(i);
    }

    std::vector<double> b_sq(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) {
        const double b = spec.claim(prices.values.at(n_steps, p));
        b_sq[p] = b * b;
    }

    std::vector<double> state(n_paths);
    for (std::size_t i = 0; i <= n_steps; ++i) {
        std::vector<double> cond_b_sq;
        if (i == n_steps) {
            cond_b_sq = b_sq;
        } else {
            for (std::size_t p = 0; p < n_paths; ++p)
                state[p] = std::log(std::max(prices.values.at(i, p), 1e-300));
            const StateRegression regression(state, reg, static_cast<int>(i), solution.flagged);
            cond_b_sq = regression.fit(b_sq, true);
        }
        for (std::size_t p = 0; p < n_paths; ++p) {
            if (solution.flagged[p]) continue;
            const double rhs = std::max(cond_b_sq[p], 0.0) + f0_tail[i] * f0_tail[i];
            const double y_sq = solution.y.at(i, p) * solution.y.at(i, p);
            ++report.n_checked;
            if (rhs <= 0.0) {
                if (y_sq > 1e-18) ++report.violations;
            } else if (std::log(std::max(y_sq, 1e-300)) >
                       report.log_k_factor + std::log(rhs)) {
                ++report.violations;
            }
        }
    }
    return report;
}

}  // namespace jumpbsde
