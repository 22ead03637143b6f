#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "jumpbsde/errors.hpp"

namespace jumpbsde {

struct RegressionConfig {
    int basis_degree = 4;
    double ridge = 1e-8;
    std::size_t min_paths_per_fit = 32;

    void validate() const {
        if (basis_degree < 0) throw ConfigError("regression: basis_degree must be >= 0");
        if (!(ridge >= 0.0)) throw ConfigError("regression: ridge must be >= 0");
        if (min_paths_per_fit == 0) throw ConfigError("regression: min_paths_per_fit >= 1");
    }
};

/// Polynomial least squares on one standardized state variable, factorized
/// once per time step and reused across targets (conditional expectation,
/// Brownian and jump projections).
///
/// Excluded samples take no part in the fit but still receive fitted values.
/// A state with no cross-sectional spread degrades to the constant basis;
/// a Gram matrix that stays non-positive-definite after escalating the ridge
/// raises NumericalError with the step index.
class StateRegression {
public:
    StateRegression(std::span<const double> state, const RegressionConfig& cfg, int step,
                    std::span<const std::uint8_t> exclude = {});

    /// With clip_to_target_range, fitted values are clamped to the target's
    /// range over included samples: a conditional expectation always lies in
    /// the range of its target, while a polynomial fit extrapolated to
    /// extreme states need not.
    std::vector<double> fit(std::span<const double> target,
                            bool clip_to_target_range = false) const;

    /// RMS of target - fitted over included samples.
    double residual_rms(std::span<const double> target, std::span<const double> fitted) const;

    std::size_t included() const { return n_included_; }
    std::size_t n_terms() const { return n_terms_; }

private:
    void solve_normal_equations(std::span<const double> rhs, std::span<double> coeffs) const;

    int step_;
    std::size_t n_terms_ = 1;
    std::size_t n_included_ = 0;
    std::vector<double> t_;               // standardized state, all samples
    std::vector<std::uint8_t> include_;   // 1 = participates in the fit
    std::vector<double> chol_;            // lower Cholesky factor, n_terms x n_terms
};

}  // namespace jumpbsde
