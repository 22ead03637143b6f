#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "jumpbsde/errors.hpp"
#include "jumpbsde/rng.hpp"

namespace jumpbsde {

/// Deterministic step function on the time grid: either a single constant or
/// one value per step.
class StepFunction {
public:
    StepFunction() : values_{0.0} {}
    StepFunction(double constant) : values_{constant} {}
    explicit StepFunction(std::vector<double> per_step);

    double operator()(std::size_t step) const {
        return values_.size() == 1 ? values_[0] : values_.at(step);
    }
    bool is_constant() const { return values_.size() == 1; }
    std::size_t size() const { return values_.size(); }
    double max_abs() const;
    double min_value() const;
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> values_;
};

/// Finite atomic Levy measure: jump marks x_j with intensities n_j.
struct JumpSpec {
    std::vector<double> marks;
    std::vector<double> intensities;

    std::size_t count() const { return marks.size(); }
    double total_mass() const;
    void validate() const;
};

/// Bounded terminal payoff B(S_T).
struct ClaimSpec {
    enum class Kind { Constant, CappedCall, Put };

    Kind kind = Kind::Constant;
    double value = 0.0;   // Constant
    double strike = 1.0;  // CappedCall, Put
    double cap = 1.0;     // CappedCall

    double operator()(double terminal_price) const;
    /// |B|_inf over all terminal prices.
    double sup_abs() const;
    void validate() const;
};

enum class ConstraintKind { Interval, HalfLineUp, HalfLineDown, WholeLine };

/// Closed set of admissible positions: a compact interval, a half-line, or
/// the whole line. Non-compact kinds are handled through truncate().
class ConstraintSet {
public:
    ConstraintSet() : kind_(ConstraintKind::Interval), lo_(0.0), hi_(0.0) {}

    static ConstraintSet interval(double lo, double hi);
    static ConstraintSet half_line_up(double lo);
    static ConstraintSet half_line_down(double hi);
    static ConstraintSet whole_line();

    ConstraintKind kind() const { return kind_; }
    bool compact() const { return kind_ == ConstraintKind::Interval; }
    bool contains(double pi) const;

    /// C^m = C intersected with [-m, m]; throws ConfigError when the intersection is empty.
    ConstraintSet truncate(double m) const;

    /// Endpoints; only meaningful where the set is bounded on that side.
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    /// sup_C |pi|; requires a compact set.
    double sup_abs() const;

private:
    ConstraintKind kind_;
    double lo_;
    double hi_;
};

/// Time grid t_0 = 0 < ... < t_N = T.
struct TimeGrid {
    std::vector<double> nodes;

    static TimeGrid uniform(double horizon, std::size_t steps);

    std::size_t steps() const { return nodes.empty() ? 0 : nodes.size() - 1; }
    double dt(std::size_t i) const { return nodes[i + 1] - nodes[i]; }
    double horizon() const { return nodes.back(); }
    void validate() const;
};

/// Market coefficients, constraint set, risk aversion and claim.
struct MarketSpec {
    StepFunction b = 0.0;
    StepFunction sigma = 1.0;
    JumpSpec jumps;
    std::vector<StepFunction> beta;  // one loading per mark
    double alpha = 1.0;
    ConstraintSet constraint = ConstraintSet::interval(-1.0, 1.0);
    ClaimSpec claim;
    double horizon = 1.0;
    double s0 = 1.0;
    double sigma_min = 1e-6;

    /// Market price of risk theta = b / sigma at a step.
    double theta(std::size_t step) const { return b(step) / sigma(step); }
    /// sup over steps of |theta|.
    double theta_sup() const;
    double beta_max_abs() const;

    void validate() const;
};

/// Per-step per-path scalar field, row-major with paths contiguous.
class PathField {
public:
    PathField() = default;
    PathField(std::size_t steps, std::size_t paths, double init = 0.0)
        : steps_(steps), paths_(paths), data_(steps * paths, init) {}

    double& at(std::size_t step, std::size_t path) { return data_[step * paths_ + path]; }
    double at(std::size_t step, std::size_t path) const { return data_[step * paths_ + path]; }
    std::span<double> row(std::size_t step) { return {data_.data() + step * paths_, paths_}; }
    std::span<const double> row(std::size_t step) const {
        return {data_.data() + step * paths_, paths_};
    }
    std::size_t steps() const { return steps_; }
    std::size_t paths() const { return paths_; }
    const std::vector<double>& data() const { return data_; }

private:
    std::size_t steps_ = 0;
    std::size_t paths_ = 0;
    std::vector<double> data_;
};

/// Simulated Brownian increments and per-mark jump counts on a grid.
///
/// Streams are keyed by (seed, path, step), so a bundle is a pure function
/// of its arguments no matter how the fill loop is scheduled.
class PathBundle {
public:
    PathBundle(TimeGrid grid, std::size_t n_paths, std::size_t n_marks, std::uint64_t seed);

    const TimeGrid& grid() const { return grid_; }
    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_marks() const { return n_marks_; }
    std::uint64_t seed() const { return seed_; }

    double dw(std::size_t step, std::size_t path) const {
        return dw_[step * n_paths_ + path];
    }
    std::uint32_t dn(std::size_t step, std::size_t mark, std::size_t path) const {
        return dn_[(step * n_marks_ + mark) * n_paths_ + path];
    }

    double& dw_slot(std::size_t step, std::size_t path) { return dw_[step * n_paths_ + path]; }
    std::uint32_t& dn_slot(std::size_t step, std::size_t mark, std::size_t path) {
        return dn_[(step * n_marks_ + mark) * n_paths_ + path];
    }

    /// Compensated jump increment dN - n dt for one mark.
    double compensated_dn(std::size_t step, std::size_t mark, std::size_t path,
                          double intensity) const {
        return static_cast<double>(dn(step, mark, path)) - intensity * grid_.dt(step);
    }

private:
    TimeGrid grid_;
    std::size_t n_paths_;
    std::size_t n_marks_;
    std::uint64_t seed_;
    std::vector<double> dw_;
    std::vector<std::uint32_t> dn_;
};

/// Price paths with per-path rejection flags (a step factor <= 0 flags the
/// whole path; flagged paths keep their last valid price and are excluded
/// from downstream statistics).
struct PricePaths {
    PathField values;  // (steps + 1) x paths
    std::vector<std::uint8_t> flagged;
    std::size_t flagged_count = 0;
};

struct WealthPaths {
    PathField values;  // (steps + 1) x paths
    double x0 = 0.0;
};

PathBundle simulate_paths(const MarketSpec& spec, const TimeGrid& grid, std::size_t n_paths,
                          std::uint64_t seed);

PricePaths evolve_price(const PathBundle& bundle, const MarketSpec& spec);

/// Wealth under a per-step per-path strategy (values must lie in the
/// constraint set; X_0 = x0).
WealthPaths evolve_wealth(const PathBundle& bundle, const MarketSpec& spec,
                          const PathField& strategy, double x0);

/// Running product E_0 = 1, E_{k+1} = E_k * factor_k. With require_positive,
/// a factor <= 0 throws.
std::vector<double> stochastic_exponential(std::span<const double> factors,
                                           bool require_positive = true);

}  // namespace jumpbsde
