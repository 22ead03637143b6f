#include "jumpbsde/levy_market.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jumpbsde {

StepFunction::StepFunction(std::vector<double> per_step) : values_(std::move(per_step)) {
    if (values_.empty()) throw ConfigError("step function needs at least one value");
}

double StepFunction::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double StepFunction::min_value() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : values_) m = std::min(m, v);
    return m;
}

double JumpSpec::total_mass() const {
    double s = 0.0;
    for (double n : intensities) s += n;
    return s;
}

void JumpSpec::validate() const {
    if (marks.size() != intensities.size())
        throw ConfigError("jumps: marks and intensities must have equal length");
    for (std::size_t j = 0; j < marks.size(); ++j) {
        if (marks[j] == 0.0) throw ConfigError("jumps: marks must be nonzero");
        if (!(intensities[j] > 0.0))
            throw ConfigError("jumps: intensities must be strictly positive");
        if (!std::isfinite(marks[j]) || !std::isfinite(intensities[j]))
            throw ConfigError("jumps: marks and intensities must be finite");
        for (std::size_t k = j + 1; k < marks.size(); ++k) {
            if (marks[j] == marks[k]) throw ConfigError("jumps: marks must be pairwise distinct");
        }
    }
}

double ClaimSpec::operator()(double terminal_price) const {
    switch (kind) {
        case Kind::Constant:
            return value;
        case Kind::CappedCall:
            return std::min(std::max(terminal_price - strike, 0.0), cap);
        case Kind::Put:
            return std::max(strike - terminal_price, 0.0);
    }
    return 0.0;
}

double ClaimSpec::sup_abs() const {
    switch (kind) {
        case Kind::Constant:
            return std::abs(value);
        case Kind::CappedCall:
            return cap;
        case Kind::Put:
            return strike;
    }
    return 0.0;
}

void ClaimSpec::validate() const {
    switch (kind) {
        case Kind::Constant:
            if (!std::isfinite(value)) throw ConfigError("claim: constant value must be finite");
            break;
        case Kind::CappedCall:
            if (!(strike >= 0.0) || !(cap > 0.0) || !std::isfinite(strike) || !std::isfinite(cap))
                throw ConfigError("claim: capped call needs strike >= 0 and cap > 0");
            break;
        case Kind::Put:
            if (!(strike > 0.0) || !std::isfinite(strike))
                throw ConfigError("claim: put needs strike > 0");
            break;
    }
}

ConstraintSet ConstraintSet::interval(double lo, double hi) {
    if (!(lo <= hi)) throw ConfigError("constraint: interval needs lo <= hi");
    ConstraintSet c;
    c.kind_ = ConstraintKind::Interval;
    c.lo_ = lo;
    c.hi_ = hi;
    return c;
}

ConstraintSet ConstraintSet::half_line_up(double lo) {
    ConstraintSet c;
    c.kind_ = ConstraintKind::HalfLineUp;
    c.lo_ = lo;
    c.hi_ = std::numeric_limits<double>::infinity();
    return c;
}

ConstraintSet ConstraintSet::half_line_down(double hi) {
    ConstraintSet c;
    c.kind_ = ConstraintKind::HalfLineDown;
    c.lo_ = -std::numeric_limits<double>::infinity();
    c.hi_ = hi;
    return c;
}

ConstraintSet ConstraintSet::whole_line() {
    ConstraintSet c;
    c.kind_ = ConstraintKind::WholeLine;
    c.lo_ = -std::numeric_limits<double>::infinity();
    c.hi_ = std::numeric_limits<double>::infinity();
    return c;
}

bool ConstraintSet::contains(double pi) const {
    return pi >= lo_ && pi <= hi_;
}

ConstraintSet ConstraintSet::truncate(double m) const {
    if (!(m >= 0.0)) throw ConfigError("constraint: truncation level must be >= 0");
    const double lo = std::max(lo_, -m);
    const double hi = std::min(hi_, m);
    if (!(lo <= hi))
        throw ConfigError("constraint: truncation C n [-m, m] is empty at m = " +
                          std::to_string(m));
    return interval(lo, hi);
}

double ConstraintSet::sup_abs() const {
    if (!compact()) throw ConfigError("constraint: sup|pi| requires a compact set");
    return std::max(std::abs(lo_), std::abs(hi_));
}

TimeGrid TimeGrid::uniform(double horizon, std::size_t steps) {
    if (!(horizon > 0.0) || steps == 0) throw ConfigError("grid: horizon > 0 and steps >= 1");
    TimeGrid g;
    g.nodes.resize(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i)
        g.nodes[i] = horizon * static_cast<double>(i) / static_cast<double>(steps);
    g.nodes.back() = horizon;
    return g;
}

void TimeGrid::validate() const {
    if (nodes.size() < 2) throw ConfigError("grid: needs at least one step");
    if (nodes.front() != 0.0) throw ConfigError("grid: t_0 must be 0");
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        if (!(nodes[i] < nodes[i + 1])) throw ConfigError("grid: nodes must strictly increase");
    }
}

double MarketSpec::theta_sup() const {
    const std::size_t n = std::max(b.size(), sigma.size());
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(theta(i)));
    return m;
}

double MarketSpec::beta_max_abs() const {
    double m = 0.0;
    for (const auto& bj : beta) m = std::max(m, bj.max_abs());
    return m;
}

void MarketSpec::validate() const {
    jumps.validate();
    claim.validate();
    if (!(alpha > 0.0)) throw ConfigError("market: alpha must be > 0");
    if (!(horizon > 0.0)) throw ConfigError("market: horizon must be > 0");
    if (!(s0 > 0.0)) throw ConfigError("market: s0 must be > 0");
    // sigma_min = 0 admits degenerate simulation-only markets; the driver
    // additionally requires sigma > 0 where theta enters.
    if (!(sigma_min >= 0.0)) throw ConfigError("market: sigma_min must be >= 0");
    if (beta.size() != jumps.count())
        throw ConfigError("market: beta needs one loading per jump mark");
    if (sigma.min_value() < sigma_min)
        throw ConfigError("market: sigma must stay >= sigma_min");
    for (std::size_t j = 0; j < beta.size(); ++j) {
        for (double v : beta[j].values()) {
            if (!(v > -1.0))
                throw ConfigError("market: beta must be > -1 for every mark (mark " +
                                  std::to_string(j) + ")");
        }
    }
    if (!std::isfinite(b.max_abs()) || !std::isfinite(sigma.max_abs()) ||
        !std::isfinite(beta_max_abs()))
        throw ConfigError("market: coefficients must be bounded");
}

PathBundle::PathBundle(TimeGrid grid, std::size_t n_paths, std::size_t n_marks,
                       std::uint64_t seed)
    : grid_(std::move(grid)),
      n_paths_(n_paths),
      n_marks_(n_marks),
      seed_(seed),
      dw_(grid_.steps() * n_paths, 0.0),
      dn_(grid_.steps() * n_marks * n_paths, 0) {}

PathBundle simulate_paths(const MarketSpec& spec, const TimeGrid& grid, std::size_t n_paths,
                          std::uint64_t seed) {
    grid.validate();
    if (n_paths == 0) throw ConfigError("simulate: n_paths must be >= 1");
    spec.jumps.validate();

    const std::size_t n_steps = grid.steps();
    const std::size_t n_marks = spec.jumps.count();
    PathBundle bundle(grid, n_paths, n_marks, seed);

    for (std::size_t p = 0; p < n_paths; ++p) {
        for (std::size_t i = 0; i < n_steps; ++i) {
            SubStream stream(seed, p, static_cast<std::uint32_t>(i));
            const double dt = grid.dt(i);
            bundle.dw_slot(i, p) = stream.normal() * std::sqrt(dt);
            for (std::size_t j = 0; j < n_marks; ++j) {
                bundle.dn_slot(i, j, p) = stream.poisson(spec.jumps.intensities[j] * dt);
            }
        }
    }
    return bundle;
}

PricePaths evolve_price(const PathBundle& bundle, const MarketSpec& spec) {
    spec.validate();
    const std::size_t n_steps = bundle.grid().steps();
    const std::size_t n_paths = bundle.n_paths();
    const std::size_t n_marks = bundle.n_marks();

    PricePaths out;
    out.values = PathField(n_steps + 1, n_paths, spec.s0);
    out.flagged.assign(n_paths, 0);

    for (std::size_t p = 0; p < n_paths; ++p) {
        double s = spec.s0;
        for (std::size_t i = 0; i < n_steps; ++i) {
            const double dt = bundle.grid().dt(i);
            double factor = 1.0 + spec.b(i) * dt + spec.sigma(i) * bundle.dw(i, p);
            for (std::size_t j = 0; j < n_marks; ++j) {
                factor += spec.beta[j](i) *
                          bundle.compensated_dn(i, j, p, spec.jumps.intensities[j]);
            }
            if (!(factor > 0.0) || out.flagged[p]) {
                if (!out.flagged[p]) {
                    out.flagged[p] = 1;
                    ++out.flagged_count;
                }
                out.values.at(i + 1, p) = s;  // freeze at last valid price
                continue;
            }
            s *= factor;
            out.values.at(i + 1, p) = s;
        }
    }
    return out;
}

WealthPaths evolve_wealth(const PathBundle& bundle, const MarketSpec& spec,
                          const PathField& strategy, double x0) {
    const std::size_t n_steps = bundle.grid().steps();
    const std::size_t n_paths = bundle.n_paths();
    if (strategy.steps() != n_steps || strategy.paths() != n_paths)
        throw ConfigError("wealth: strategy shape must match the bundle");

    WealthPaths out;
    out.x0 = x0;
    out.values = PathField(n_steps + 1, n_paths, x0);

    for (std::size_t p = 0; p < n_paths; ++p) {
        double x = x0;
        for (std::size_t i = 0; i < n_steps; ++i) {
            const double pi = strategy.at(i, p);
            if (!spec.constraint.contains(pi))
                throw ConfigError("wealth: strategy value " + std::to_string(pi) +
                                  " outside constraint set at step " + std::to_string(i) +
                                  ", path " + std::to_string(p));
            const double dt = bundle.grid().dt(i);
            double incr = spec.b(i) * dt + spec.sigma(i) * bundle.dw(i, p);
            for (std::size_t j = 0; j < bundle.n_marks(); ++j) {
                incr += spec.beta[j](i) *
                        bundle.compensated_dn(i, j, p, spec.jumps.intensities[j]);
            }
            x += pi * incr;
            out.values.at(i + 1, p) = x;
        }
    }
    return out;
}

std::vector<double> stochastic_exponential(std::span<const double> factors,
                                           bool require_positive) {
    std::vector<double> out(factors.size() + 1);
    out[0] = 1.0;
    for (std::size_t k = 0; k < factors.size(); ++k) {
        if (require_positive && !(factors[k] > 0.0))
            throw ConfigError("stochastic exponential: factor <= 0 at index " +
                              std::to_string(k));
        out[k + 1] = out[k] * factors[k];
    }
    return out;
}

}  // namespace jumpbsde
