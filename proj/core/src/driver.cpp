#include "jumpbsde/driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace jumpbsde {

namespace {

constexpr double kGoldenInv = 0.6180339887498949;
constexpr double kPiTol = 1e-8;

struct MinResult {
    double arg;
    double value;
};

/// Golden-section search on [lo, hi]; ties resolve to the smallest argument.
template <typename F>
MinResult minimize_convex(F&& f, double lo, double hi) {
    if (hi - lo <= kPiTol) {
        const double mid = 0.5 * (lo + hi);
        return {mid, f(mid)};
    }
    double a = lo, b = hi;
    double x1 = b - kGoldenInv * (b - a);
    double x2 = a + kGoldenInv * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > kPiTol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kGoldenInv * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kGoldenInv * (b - a);
            f2 = f(x2);
        }
    }
    // Boundary minima carry a one-sided slope, so the bracket midpoint alone
    // leaves an O(tol) value error; evaluating the candidates below makes
    // endpoint minima exact. Ties resolve to the smallest pi (flat objectives
    // land on lo).
    const double mid = 0.5 * (a + b);
    const double args[] = {lo, a, mid, b, hi};
    double vals[5];
    double best_val = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 5; ++k) {
        vals[k] = f(args[k]);
        best_val = std::min(best_val, vals[k]);
    }
    const double slack = 1e-12 * std::max(1.0, std::abs(best_val));
    for (int k = 0; k < 5; ++k) {
        if (vals[k] <= best_val + slack) return {args[k], vals[k]};
    }
    return {mid, f(mid)};
}

double require_alpha(double alpha) {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
    return alpha;
}

}  // namespace

double g_alpha(double alpha, double y) {
    require_alpha(alpha);
    return (std::expm1(alpha * y) - alpha * y) / alpha;
}

double g_alpha_prime(double alpha, double y) {
    require_alpha(alpha);
    return std::expm1(alpha * y);
}

double jump_penalty(double alpha, std::span<const double> u, const JumpSpec& jumps) {
    if (u.size() != jumps.count())
        throw ConfigError("jump penalty: u needs one entry per mark");
    double s = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) s += g_alpha(alpha, u[j]) * jumps.intensities[j];
    return s;
}

double rho(double m, double x) {
    if (!(m >= 0.0)) throw ConfigError("rho: level must be >= 0");
    const double ax = std::abs(x);
    if (ax <= m) return 1.0;
    if (ax >= m + 1.0) return 0.0;
    const double s = ax - m;
    return 1.0 - 3.0 * s * s + 2.0 * s * s * s;
}

DriverAtStep::DriverAtStep(std::size_t t_index, const MarketSpec& spec,
                           const ConstraintSet& constraint)
    : alpha_(require_alpha(spec.alpha)),
      sigma_(spec.sigma(t_index)),
      theta_(spec.theta(t_index)),
      lo_(constraint.lo()),
      hi_(constraint.hi()),
      intensities_(spec.jumps.intensities) {
    if (!(sigma_ > 0.0)) throw ConfigError("driver: sigma must be > 0");
    if (!constraint.compact())
        throw ConfigError("driver: constraint set must be compact (truncate it first)");
    beta_.resize(spec.beta.size());
    for (std::size_t j = 0; j < spec.beta.size(); ++j) beta_[j] = spec.beta[j](t_index);
}

DriverAtStep DriverAtStep::truncated(double m, std::size_t t_index, const MarketSpec& spec,
                                     const ConstraintSet& constraint) {
    const double floor = truncation_floor(spec);
    if (m < floor)
        throw ConfigError("driver: truncation level m = " + std::to_string(m) +
                          " is below M = 2(|C1|+|C2|) = " + std::to_string(floor));
    DriverAtStep d(t_index, spec, constraint);
    d.truncated_ = true;
    d.m_ = m;
    // rho needs a usable transition band even when M is tiny.
    d.mu_ = std::max(floor, 1.0);
    return d;
}

double DriverAtStep::inner_objective(double pi, double z, std::span<const double> u) const {
    const double weight_z = truncated_ ? rho(m_, z) : 1.0;
    const double d = pi * sigma_ - (z + theta_ / alpha_);
    double value = 0.5 * alpha_ * d * d * weight_z;
    for (std::size_t j = 0; j < u.size(); ++j) {
        const double g = g_alpha(alpha_, u[j] - pi * beta_[j]);
        const double w = truncated_ ? rho(mu_, u[j]) : 1.0;
        value += g * w * intensities_[j];
    }
    return value;
}

DriverEval DriverAtStep::operator()(double z, std::span<const double> u) const {
    if (u.size() != beta_.size()) throw ConfigError("driver: u needs one entry per mark");
    const auto objective = [&](double pi) { return inner_objective(pi, z, u); };
    const MinResult m = minimize_convex(objective, lo_, hi_);

    DriverEval out;
    out.minimizer = m.arg;
    const double weight_z = truncated_ ? rho(m_, z) : 1.0;
    const double d = m.arg * sigma_ - (z + theta_ / alpha_);
    out.quadratic_part = 0.5 * alpha_ * d * d * weight_z;
    out.jump_part = m.value - out.quadratic_part;
    out.affine_part = -theta_ * z - theta_ * theta_ / (2.0 * alpha_);
    out.value = m.value + out.affine_part;
    return out;
}

DriverEval driver_eval(std::size_t t_index, double z, std::span<const double> u,
                       const MarketSpec& spec, const ConstraintSet& constraint) {
    return DriverAtStep(t_index, spec, constraint)(z, u);
}

double truncation_floor(const MarketSpec& spec) {
    const double b_inf = spec.claim.sup_abs();
    const double th = spec.theta_sup();
    const double c1 = -b_inf - th * th * spec.horizon / (2.0 * spec.alpha);
    const double c2 = b_inf;
    return 2.0 * (std::abs(c1) + std::abs(c2));
}

DriverEval driver_truncated(double m, std::size_t t_index, double z, std::span<const double> u,
                            const MarketSpec& spec, const ConstraintSet& constraint) {
    return DriverAtStep::truncated(m, t_index, spec, constraint)(z, u);
}

double truncated_lipschitz_constant(const MarketSpec& spec, const ConstraintSet& constraint,
                                    double m) {
    const double alpha = spec.alpha;
    const double pi_sup = constraint.sup_abs();
    const double sigma_max = spec.sigma.max_abs();
    const double theta_sup = spec.theta_sup();
    const double mu = std::max(truncation_floor(spec), 1.0);

    // z direction: quadratic radius on the support of rho_m, |rho'| <= 3/2.
    const double radius = pi_sup * sigma_max + (m + 1.0) + theta_sup / alpha;
    const double lip_z = alpha * radius + 0.75 * alpha * radius * radius + theta_sup;

    // u direction: slope of g_alpha(u - pi beta) rho_M(u) on its support,
    // brought to the L2(n) norm by Cauchy-Schwarz.
    const double arg_max = (mu + 1.0) + pi_sup * spec.beta_max_abs();
    const double slope = std::expm1(alpha * arg_max) + 1.5 * g_alpha(alpha, arg_max);
    const double lip_u = slope * std::sqrt(std::max(spec.jumps.total_mass(), 0.0));

    return std::max(lip_z, lip_u);
}

std::vector<SamplePoint> make_driver_samples(std::size_t n_marks, std::size_t n_points,
                                             double z_range, double u_range,
                                             std::size_t n_steps, std::uint64_t seed) {
    std::vector<SamplePoint> pts(n_points);
    for (std::size_t k = 0; k < n_points; ++k) {
        SubStream stream(seed, k, 0);
        pts[k].t_index = n_steps == 0 ? 0 : k % n_steps;
        pts[k].z = (2.0 * stream.uniform() - 1.0) * z_range;
        pts[k].u.resize(n_marks);
        for (std::size_t j = 0; j < n_marks; ++j)
            pts[k].u[j] = (2.0 * stream.uniform() - 1.0) * u_range;
    }
    return pts;
}

H1Report check_H1(const MarketSpec& spec, const ConstraintSet& constraint,
                  std::span<const SamplePoint> points) {
    H1Report report;
    report.worst_lower_gap = std::numeric_limits<double>::infinity();
    report.worst_upper_gap = std::numeric_limits<double>::infinity();
    for (const SamplePoint& pt : points) {
        const double theta = spec.theta(pt.t_index);
        const double f = driver_eval(pt.t_index, pt.z, pt.u, spec, constraint).value;
        const double lower = -theta * pt.z - theta * theta / (2.0 * spec.alpha);
        const double upper =
            0.5 * spec.alpha * pt.z * pt.z + jump_penalty(spec.alpha, pt.u, spec.jumps);
        const double scale = std::max({1.0, std::abs(f), std::abs(lower), std::abs(upper)});
        const double slack = 1e-12 * scale;
        const bool bad = f < lower - slack || f > upper + slack;
        if (f < lower - slack) ++report.lower_violations;
        if (f > upper + slack) ++report.upper_violations;
        if (bad && report.violating_points.size() < 32)
            report.violating_points.push_back(report.n_points);
        report.worst_lower_gap = std::min(report.worst_lower_gap, f - lower);
        report.worst_upper_gap = std::min(report.worst_upper_gap, upper - f);
        ++report.n_points;
    }
    return report;
}

namespace {

/// Average of g_alpha' over the segment between a and b, via the exact
/// antiderivative identity (g(b) - g(a)) / (b - a).
double mean_slope(double alpha, double a, double b) {
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    if (std::abs(b - a) <= 1e-9 * scale) return g_alpha_prime(alpha, 0.5 * (a + b));
    return (g_alpha(alpha, b) - g_alpha(alpha, a)) / (b - a);
}

}  // namespace

GammaResult gamma_coefficient(double alpha, std::span<const double> u,
                              std::span<const double> u_prime, std::span<const double> beta_at_t,
                              const ConstraintSet& constraint, const JumpSpec& jumps) {
    require_alpha(alpha);
    if (!constraint.compact()) throw ConfigError("gamma: constraint set must be compact");
    if (u.size() != jumps.count() || u_prime.size() != jumps.count() ||
        beta_at_t.size() != jumps.count())
        throw ConfigError("gamma: u, u' and beta need one entry per mark");

    GammaResult out;
    out.gamma.resize(u.size());

    double arg_bound = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        // The mean slope is monotone in pi (the segment translates by
        // -pi beta_j), so the extrema over a compact interval sit at the ends.
        const double q_lo = mean_slope(alpha, u_prime[j] - constraint.lo() * beta_at_t[j],
                                       u[j] - constraint.lo() * beta_at_t[j]);
        const double q_hi = mean_slope(alpha, u_prime[j] - constraint.hi() * beta_at_t[j],
                                       u[j] - constraint.hi() * beta_at_t[j]);
        out.gamma[j] = u[j] >= u_prime[j] ? std::max(q_lo, q_hi) : std::min(q_lo, q_hi);
        arg_bound = std::max({arg_bound, std::abs(u[j]), std::abs(u_prime[j])});
    }

    double beta_max = 0.0;
    for (double bj : beta_at_t) beta_max = std::max(beta_max, std::abs(bj));
    const double k_prime = arg_bound + constraint.sup_abs() * beta_max;
    out.delta_lower = std::expm1(-alpha * k_prime);
    out.c_upper = std::expm1(alpha * k_prime);
    return out;
}

double lambda_coefficient(std::size_t t_index, double z, double z_prime,
                          std::span<const double> u, const MarketSpec& spec,
                          const ConstraintSet& constraint) {
    if (z == z_prime) return 0.0;
    const DriverAtStep d(t_index, spec, constraint);
    return (d(z, u).value - d(z_prime, u).value) / (z - z_prime);
}

H2Coefficients h2_coefficients(std::size_t t_index, double z, double z_prime,
                               std::span<const double> u, std::span<const double> u_prime,
                               const MarketSpec& spec, const ConstraintSet& constraint) {
    H2Coefficients out;
    out.lambda = lambda_coefficient(t_index, z, z_prime, u, spec, constraint);

    std::vector<double> beta_t(spec.beta.size());
    for (std::size_t j = 0; j < spec.beta.size(); ++j) beta_t[j] = spec.beta[j](t_index);
    GammaResult g = gamma_coefficient(spec.alpha, u, u_prime, beta_t, constraint, spec.jumps);
    out.gamma = std::move(g.gamma);
    out.delta_lower = g.delta_lower;
    out.c_upper = g.c_upper;

    out.kappa =
        std::abs(spec.theta(t_index)) + 2.0 * spec.sigma(t_index) * constraint.sup_abs();
    out.lambda_bound = 0.5 * spec.alpha * (out.kappa + std::abs(z) + std::abs(z_prime));
    return out;
}

}  // namespace jumpbsde
