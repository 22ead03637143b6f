#include "jumpbsde/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jumpbsde {

namespace {

/// In-place Cholesky of a dense symmetric matrix; returns false when a pivot
/// is not safely positive.
bool cholesky(std::vector<double>& a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (!(s > 0.0) || !std::isfinite(s)) return false;
                a[i * n + i] = std::sqrt(s);
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
        for (std::size_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
    }
    return true;
}

}  // namespace

StateRegression::StateRegression(std::span<const double> state, const RegressionConfig& cfg,
                                 int step, std::span<const std::uint8_t> exclude)
    : step_(step) {
    cfg.validate();
    const std::size_t n = state.size();
    include_.assign(n, 1);
    if (!exclude.empty()) {
        if (exclude.size() != n)
            throw ConfigError("regression: exclusion mask size must match the state");
        for (std::size_t p = 0; p < n; ++p) include_[p] = exclude[p] ? 0 : 1;
    }
    for (std::size_t p = 0; p < n; ++p) n_included_ += include_[p];
    if (n_included_ == 0) throw NumericalError("regression: no usable paths", step);
    if (n_included_ < cfg.min_paths_per_fit)
        throw NumericalError("regression: fewer paths than min_paths_per_fit", step);

    double mean = 0.0;
    for (std::size_t p = 0; p < n; ++p)
        if (include_[p]) mean += state[p];
    mean /= static_cast<double>(n_included_);
    double var = 0.0;
    for (std::size_t p = 0; p < n; ++p)
        if (include_[p]) var += (state[p] - mean) * (state[p] - mean);
    var /= static_cast<double>(n_included_);
    const double sd = std::sqrt(var);

    const bool degenerate = sd < 1e-12 * std::max(1.0, std::abs(mean));
    n_terms_ = degenerate ? 1
                          : std::min<std::size_t>(static_cast<std::size_t>(cfg.basis_degree) + 1,
                                                  n_included_);

    // The standardized state is winsorized at +-3: beyond the data cloud a
    // raw polynomial basis extrapolates violently, and the per-step Z and U
    // projections divide the fitted values by dt, squaring any tail overshoot
    // through the quadratic driver. Past 3 sigma the fit extends flat.
    t_.resize(n);
    const double inv_sd = degenerate ? 0.0 : 1.0 / sd;
    for (std::size_t p = 0; p < n; ++p)
        t_[p] = std::clamp((state[p] - mean) * inv_sd, -3.0, 3.0);

    // Gram matrix from power sums of the standardized state.
    std::vector<double> power_sum(2 * n_terms_ - 1, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        if (!include_[p]) continue;
        double tp = 1.0;
        for (std::size_t q = 0; q < power_sum.size(); ++q) {
            power_sum[q] += tp;
            tp *= t_[p];
        }
    }

    std::vector<double> gram(n_terms_ * n_terms_);
    double diag_mean = 0.0;
    for (std::size_t a = 0; a < n_terms_; ++a) {
        for (std::size_t b = 0; b < n_terms_; ++b) gram[a * n_terms_ + b] = power_sum[a + b];
        diag_mean += power_sum[2 * a];
    }
    diag_mean /= static_cast<double>(n_terms_);

    double ridge = std::max(cfg.ridge, 0.0);
    for (;;) {
        chol_ = gram;
        for (std::size_t a = 0; a < n_terms_; ++a) chol_[a * n_terms_ + a] += ridge * diag_mean;
        if (cholesky(chol_, n_terms_)) break;
        ridge = std::max(ridge * 100.0, 1e-12);
        if (ridge > 1.0)
            throw NumericalError("regression: matrix singular beyond ridge rescue", step);
    }
}

void StateRegression::solve_normal_equations(std::span<const double> rhs,
                                             std::span<double> coeffs) const {
    const std::size_t k = n_terms_;
    // forward then backward substitution against the Cholesky factor
    for (std::size_t i = 0; i < k; ++i) {
        double s = rhs[i];
        for (std::size_t j = 0; j < i; ++j) s -= chol_[i * k + j] * coeffs[j];
        coeffs[i] = s / chol_[i * k + i];
    }
    for (std::size_t ii = k; ii-- > 0;) {
        double s = coeffs[ii];
        for (std::size_t j = ii + 1; j < k; ++j) s -= chol_[j * k + ii] * coeffs[j];
        coeffs[ii] = s / chol_[ii * k + ii];
    }
}

std::vector<double> StateRegression::fit(std::span<const double> target,
                                         bool clip_to_target_range) const {
    const std::size_t n = t_.size();
    if (target.size() != n) throw ConfigError("regression: target size must match the state");

    std::vector<double> rhs(n_terms_, 0.0);
    double target_lo = std::numeric_limits<double>::infinity();
    double target_hi = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < n; ++p) {
        if (!include_[p]) continue;
        target_lo = std::min(target_lo, target[p]);
        target_hi = std::max(target_hi, target[p]);
        double tp = 1.0;
        for (std::size_t a = 0; a < n_terms_; ++a) {
            rhs[a] += tp * target[p];
            tp *= t_[p];
        }
    }

    std::vector<double> coeffs(n_terms_);
    solve_normal_equations(rhs, coeffs);

    std::vector<double> fitted(n);
    for (std::size_t p = 0; p < n; ++p) {
        double tp = 1.0;
        double acc = 0.0;
        for (std::size_t a = 0; a < n_terms_; ++a) {
            acc += coeffs[a] * tp;
            tp *= t_[p];
        }
        fitted[p] = clip_to_target_range ? std::clamp(acc, target_lo, target_hi) : acc;
    }
    return fitted;
}

double StateRegression::residual_rms(std::span<const double> target,
                                     std::span<const double> fitted) const {
    double s = 0.0;
    for (std::size_t p = 0; p < t_.size(); ++p) {
        if (!include_[p]) continue;
        const double r = target[p] - fitted[p];
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(n_included_));
}

}  // namespace jumpbsde
