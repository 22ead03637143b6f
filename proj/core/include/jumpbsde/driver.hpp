#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "jumpbsde/levy_market.hpp"

namespace jumpbsde {

/// g_alpha(y) = (exp(alpha*y) - alpha*y - 1) / alpha. Nonnegative, convex,
/// zero at y = 0.
double g_alpha(double alpha, double y);

/// g_alpha'(y) = exp(alpha*y) - 1. Always > -1.
double g_alpha_prime(double alpha, double y);

/// Entropic jump penalty |u|_alpha = sum_j g_alpha(u_j) * n_j.
double jump_penalty(double alpha, std::span<const double> u, const JumpSpec& jumps);

/// C1 truncation weight: 1 on |x| <= m, 0 on |x| >= m+1, cubic smoothstep
/// in between. Nondecreasing in m for fixed x.
double rho(double m, double x);

/// Result of the inner minimization defining the generator at one point.
struct DriverEval {
    double value = 0.0;           // f(t, z, u)
    double minimizer = 0.0;       // pi* in C
    double quadratic_part = 0.0;  // (alpha/2)|pi* sigma - (z + theta/alpha)|^2
    double jump_part = 0.0;       // |u - pi* beta|_alpha
    double affine_part = 0.0;     // -theta z - theta^2 / (2 alpha)
};

/// Generator evaluator bound to one time step. Precomputes the step
/// coefficients so per-path evaluation allocates nothing. The referenced
/// MarketSpec must outlive the evaluator.
class DriverAtStep {
public:
    /// Untruncated generator.
    DriverAtStep(std::size_t t_index, const MarketSpec& spec, const ConstraintSet& constraint);

    /// Truncated generator f^m (quadratic weighted by rho_m(z), atoms by
    /// rho_M(u_j)). Throws when m is below M = 2(|C1|+|C2|).
    static DriverAtStep truncated(double m, std::size_t t_index, const MarketSpec& spec,
                                  const ConstraintSet& constraint);

    DriverEval operator()(double z, std::span<const double> u) const;

    /// Inner objective at a given position (no affine part); used by the
    /// supermartingale machinery to price deviations from the minimizer.
    double inner_objective(double pi, double z, std::span<const double> u) const;

    double theta() const { return theta_; }
    double sigma() const { return sigma_; }
    std::span<const double> beta() const { return beta_; }

private:
    double alpha_;
    double sigma_;
    double theta_;
    double lo_;
    double hi_;
    std::vector<double> beta_;
    std::vector<double> intensities_;
    bool truncated_ = false;
    double m_ = 0.0;
    double mu_ = 0.0;
};

/// Generator f(t, z, u) = inf over pi in C of the quadratic + jump objective,
/// plus the affine part. Requires a compact constraint set; for non-compact
/// sets pass C.truncate(m). Ties resolve to the smallest pi.
DriverEval driver_eval(std::size_t t_index, double z, std::span<const double> u,
                       const MarketSpec& spec, const ConstraintSet& constraint);

/// Floor M = 2(|C1| + |C2|) below which truncation levels are not allowed.
double truncation_floor(const MarketSpec& spec);

/// Truncated generator f^m at one point. Coincides with f when |z| <= m and
/// |u_j| <= M; nondecreasing in m pointwise.
DriverEval driver_truncated(double m, std::size_t t_index, double z, std::span<const double> u,
                            const MarketSpec& spec, const ConstraintSet& constraint);

/// Lipschitz constant of f^m in (z, u) derived from the truncated ranges.
/// Coarse but valid upper bound.
double truncated_lipschitz_constant(const MarketSpec& spec, const ConstraintSet& constraint,
                                    double m);

/// One sampled argument of the generator.
struct SamplePoint {
    std::size_t t_index = 0;
    double z = 0.0;
    std::vector<double> u;
};

/// Deterministic bounded sample of (t, z, u) points for sweeps.
std::vector<SamplePoint> make_driver_samples(std::size_t n_marks, std::size_t n_points,
                                             double z_range, double u_range,
                                             std::size_t n_steps, std::uint64_t seed);

/// Sandwich check -theta z - theta^2/(2 alpha) <= f <= (alpha/2) z^2 + |u|_alpha.
struct H1Report {
    std::size_t n_points = 0;
    std::size_t lower_violations = 0;
    std::size_t upper_violations = 0;
    double worst_lower_gap = 0.0;  // min over points of f - lower (negative = violation)
    double worst_upper_gap = 0.0;  // min over points of upper - f
    std::vector<std::size_t> violating_points;  // sample indices, capped

    bool ok() const { return lower_violations == 0 && upper_violations == 0; }
};

H1Report check_H1(const MarketSpec& spec, const ConstraintSet& constraint,
                  std::span<const SamplePoint> points);

/// Per-mark increment coefficients gamma_j(u, u') together with the envelope
/// (-1 + delta, Cbar) implied by the bound K' on all arguments.
struct GammaResult {
    std::vector<double> gamma;
    double delta_lower = 0.0;  // e^{-alpha K'} - 1
    double c_upper = 0.0;      // e^{alpha K'} - 1
};

GammaResult gamma_coefficient(double alpha, std::span<const double> u,
                              std::span<const double> u_prime, std::span<const double> beta_at_t,
                              const ConstraintSet& constraint, const JumpSpec& jumps);

/// Difference quotient of f in z at fixed u; 0 when z == z'.
double lambda_coefficient(std::size_t t_index, double z, double z_prime,
                          std::span<const double> u, const MarketSpec& spec,
                          const ConstraintSet& constraint);

/// Structural coefficients for the increment estimates at one evaluation.
/// kappa folds the position-size term 2 sigma sup_C|pi| into the bound
/// process next to |theta|, so lambda_bound = (alpha/2)(kappa + |z| + |z'|)
/// dominates the quotient everywhere.
struct H2Coefficients {
    double lambda = 0.0;
    std::vector<double> gamma;
    double kappa = 0.0;
    double lambda_bound = 0.0;
    double delta_lower = 0.0;
    double c_upper = 0.0;
};

H2Coefficients h2_coefficients(std::size_t t_index, double z, double z_prime,
                               std::span<const double> u, std::span<const double> u_prime,
                               const MarketSpec& spec, const ConstraintSet& constraint);

}  // namespace jumpbsde
