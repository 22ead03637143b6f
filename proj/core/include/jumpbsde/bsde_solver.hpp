#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "jumpbsde/driver.hpp"
#include "jumpbsde/levy_market.hpp"
#include "jumpbsde/regression.hpp"

namespace jumpbsde {

/// Deterministic sandwich for Y. C1 and C2 are exact; C3 is a heuristic
/// scale for the conditional tail sums and is never a hard gate.
struct APrioriBounds {
    double c1 = 0.0;
    double c2 = 0.0;
    double c3_estimate = 0.0;
};

APrioriBounds a_priori_bounds(const MarketSpec& spec);

struct BsdeDiagnostics {
    double min_y = 0.0;
    double max_y = 0.0;
    double max_abs_u = 0.0;
    /// Largest pre-clamp overshoot above C2 / below C1 (0 when none).
    double preclamp_excess_high = 0.0;
    double preclamp_excess_low = 0.0;
    /// Largest pre-clamp overshoot of |U| above 2(|C1| v |C2|) + tol.
    double preclamp_u_excess = 0.0;
    double u_clamp_bound = 0.0;
    double max_clamp_tol = 0.0;
    /// Pre-clamp values stayed inside the per-step clamp band.
    bool bounds_ok = true;
    std::size_t flagged_paths = 0;
    double max_residual_rms = 0.0;
};

struct BsdeSolution {
    TimeGrid grid;
    PathField y;               // (steps + 1) x paths
    PathField z;               // steps x paths
    std::vector<PathField> u;  // one (steps x paths) field per mark
    std::vector<std::uint8_t> flagged;
    APrioriBounds bounds;
    BsdeDiagnostics diagnostics;
    std::vector<double> residual_rms;  // per step, conditional-expectation fit

    double y0_mean() const;
    double max_abs_y() const;
};

/// Plain generator, or the truncated ladder member f^m.
struct SolveMode {
    bool truncated = false;
    double level = 0.0;
};

/// Backward least-squares Monte Carlo solve of the BSDE on the bundle's
/// grid. Terminal condition is exact; per step, Z and U come from projecting
/// Y_{i+1} on the Brownian and compensated jump increments, and Y from the
/// regressed conditional expectation plus f dt. Y is clamped to the a priori
/// band [C1 - tol, C2 + tol] with the pre-clamp excess recorded.
BsdeSolution solve_bsde(const PathBundle& bundle, const PricePaths& prices,
                        const MarketSpec& spec, const ConstraintSet& constraint,
                        const RegressionConfig& reg, const SolveMode& mode = {});

enum class LadderMode { CompactTruncation, ConstraintTruncation };

struct ConvergenceReport {
    LadderMode mode = LadderMode::CompactTruncation;
    std::vector<double> levels;
    std::vector<double> y0_mean;    // per level
    std::vector<double> y_gap_sup;  // per level: sup_t mean|Y^m - Y^last|
    std::vector<double> z_dist_l2;  // per level vs last level
    std::vector<double> u_dist_l2;
    /// Worst wrong-direction gap between consecutive levels, per-step means.
    double worst_mean_violation = 0.0;
    /// Same, taken pathwise.
    double worst_pathwise_violation = 0.0;

    bool monotone_ok(double tol) const { return worst_mean_violation <= tol; }
};

struct LadderResult {
    std::vector<BsdeSolution> solutions;
    ConvergenceReport report;
};

/// Monotone approximation ladders: increasing truncations f^m of the
/// generator (compact mode, Y nondecreasing in m), or growing constraint
/// sets C intersected with [-m, m] (non-compact mode, Y nonincreasing in m).
LadderResult solve_sequence(LadderMode mode, std::span<const double> m_values,
                            const PathBundle& bundle, const PricePaths& prices,
                            const MarketSpec& spec, const ConstraintSet& constraint,
                            const RegressionConfig& reg);

/// Conditional tail sums E[ sum_{k>=i} |Z|^2 dt + ||U||^2_{L2(n)} dt | F_i ],
/// regression-estimated at grid times and compared to the heuristic C3.
struct BmoReport {
    double c3_estimate = 0.0;
    std::vector<double> step_max_tail;
    std::size_t steps_exceeding = 0;
    bool ok() const { return steps_exceeding == 0; }
};

BmoReport bmo_diagnostic(const BsdeSolution& solution, const PricePaths& prices,
                         const MarketSpec& spec, const RegressionConfig& reg);

/// Pointwise equivalence c1 ||u||^2_{L2(n)} <= |u|_alpha <= c2 ||u||^2_{L2(n)}
/// with constants from the realized bound on U.
struct NormEquivalenceReport {
    double k_y = 0.0;     // 2 max|Y|
    double k_used = 0.0;  // max(k_y, realized max|U|)
    double c_lower = 0.0;
    double c_upper = 0.0;
    std::size_t n_checked = 0;
    std::size_t violations = 0;
    double worst_lower_margin = 0.0;  // min of |u|_alpha - c1||u||^2
    double worst_upper_margin = 0.0;  // min of c2||u||^2 - |u|_alpha
    /// How far U strays above the Corollary bound 2 max|Y| (0 when inside).
    double u_bound_excess = 0.0;
    bool ok() const { return violations == 0; }
};

NormEquivalenceReport norm_equivalence_check(const BsdeSolution& solution,
                                             const MarketSpec& spec);

/// |Y_t|^2 against K(L,T) E[|B|^2 + (int_t^T |f^m(s,0,0)| ds)^2 | F_t] with
/// K(L,T) = C0 exp(4 L^2 T), compared in the log domain. Report only.
struct LipschitzBoundReport {
    double lipschitz_constant = 0.0;
    double log_k_factor = 0.0;  // log C0 + 4 L^2 T
    std::size_t n_checked = 0;
    std::size_t violations = 0;
    bool ok() const { return violations == 0; }
};

LipschitzBoundReport lipschitz_bound_diagnostic(const BsdeSolution& solution,
                                                const PricePaths& prices,
                                                const MarketSpec& spec,
                                                const ConstraintSet& constraint,
                                                const RegressionConfig& reg, double m,
                                                double c0 = 8.0);

}  // namespace jumpbsde
