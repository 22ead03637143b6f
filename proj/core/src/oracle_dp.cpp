#include "jumpbsde/oracle_dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace jumpbsde {

namespace {

constexpr std::size_t kMaxNodes = 4u << 20;

/// Dense Cholesky solve for the small branch-projection Gram matrix.
class SmallSpd {
public:
    SmallSpd(std::vector<double> matrix, std::size_t n) : l_(std::move(matrix)), n_(n) {
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double s = l_[i * n_ + j];
                for (std::size_t k = 0; k < j; ++k) s -= l_[i * n_ + k] * l_[j * n_ + k];
                if (i == j) {
                    if (!(s > 0.0))
                        throw NumericalError("tree projection Gram not positive definite", 0);
                    l_[i * n_ + i] = std::sqrt(s);
                } else {
                    l_[i * n_ + j] = s / l_[j * n_ + j];
                }
            }
        }
    }

    void solve(std::span<double> rhs) const {
        for (std::size_t i = 0; i < n_; ++i) {
            double s = rhs[i];
            for (std::size_t j = 0; j < i; ++j) s -= l_[i * n_ + j] * rhs[j];
            rhs[i] = s / l_[i * n_ + i];
        }
        for (std::size_t ii = n_; ii-- > 0;) {
            double s = rhs[ii];
            for (std::size_t j = ii + 1; j < n_; ++j) s -= l_[j * n_ + ii] * rhs[j];
            rhs[ii] = s / l_[ii * n_ + ii];
        }
    }

private:
    std::vector<double> l_;
    std::size_t n_;
};

}  // namespace

TreeModel::TreeModel(const MarketSpec& spec, std::size_t depth) : spec_(spec), depth_(depth) {
    spec_.validate();
    if (depth == 0) throw ConfigError("tree: depth must be >= 1");
    const auto check_len = [&](const StepFunction& f, const std::string& name) {
        if (!f.is_constant() && f.size() < depth)
            throw ConfigError("tree: per-step coefficient " + name + " has fewer than depth = " +
                              std::to_string(depth) + " entries");
    };
    check_len(spec.b, "b");
    check_len(spec.sigma, "sigma");
    for (std::size_t j = 0; j < spec.beta.size(); ++j)
        check_len(spec.beta[j], "beta[" + std::to_string(j) + "]");
    dt_ = spec.horizon / static_cast<double>(depth);

    const std::size_t n_marks = spec.jumps.count();
    double jump_mass = 0.0;
    for (double n : spec.jumps.intensities) jump_mass += n * dt_;
    if (jump_mass > 0.5)
        throw ConfigError("tree: sum of n_j dt = " + std::to_string(jump_mass) +
                          " exceeds 1/2; refine the grid");

    const double sqrt_dt = std::sqrt(dt_);
    const std::size_t n_branches = 2 * (n_marks + 1);
    branch_prob_.resize(n_branches);
    branch_dw_.resize(n_branches);
    branch_jump_.resize(n_branches);
    for (std::size_t w = 0; w < 2; ++w) {
        for (std::size_t jb = 0; jb <= n_marks; ++jb) {
            const std::size_t br = w * (n_marks + 1) + jb;
            branch_dw_[br] = w == 0 ? sqrt_dt : -sqrt_dt;
            branch_jump_[br] = jb == 0 ? -1 : static_cast<int>(jb - 1);
            const double jump_prob =
                jb == 0 ? 1.0 - jump_mass : spec.jumps.intensities[jb - 1] * dt_;
            branch_prob_[br] = 0.5 * jump_prob;
        }
    }

    double total_nodes = 1.0;
    for (std::size_t l = 0; l < depth; ++l) {
        total_nodes *= static_cast<double>(n_branches);
        if (total_nodes > static_cast<double>(kMaxNodes))
            throw ConfigError("tree: too many nodes; reduce depth or marks");
    }

    prices_.resize(depth + 1);
    prices_[0] = {spec.s0};
    for (std::size_t l = 0; l < depth; ++l) {
        prices_[l + 1].resize(prices_[l].size() * n_branches);
        for (std::size_t br = 0; br < n_branches; ++br) {
            const double factor = price_factor(l, br);
            if (!(factor > 0.0))
                throw ConfigError("tree: nonpositive price factor at step " + std::to_string(l) +
                                  "; shrink dt or the coefficients");
        }
        for (std::size_t node = 0; node < prices_[l].size(); ++node) {
            for (std::size_t br = 0; br < n_branches; ++br)
                prices_[l + 1][child(node, br)] = prices_[l][node] * price_factor(l, br);
        }
    }
}

double TreeModel::price_factor(std::size_t step, std::size_t br) const {
    double f = 1.0 + spec_.b(step) * dt_ + spec_.sigma(step) * branch_dw_[br];
    const int jump = branch_jump_[br];
    for (std::size_t j = 0; j < spec_.jumps.count(); ++j) {
        const double dn = (jump == static_cast<int>(j) ? 1.0 : 0.0) -
                          spec_.jumps.intensities[j] * dt_;
        f += spec_.beta[j](step) * dn;
    }
    return f;
}

std::size_t TreeModel::level_count(std::size_t level) const {
    std::size_t n = 1;
    for (std::size_t l = 0; l < level; ++l) n *= n_branches();
    return n;
}

double TreeModel::prob_sum_error() const {
    double s = 0.0;
    for (double p : branch_prob_) s += p;
    return std::abs(s - 1.0);
}

ActionGrid ActionGrid::uniform(const ConstraintSet& constraint, std::size_t count) {
    if (!constraint.compact()) throw ConfigError("action grid: constraint set must be compact");
    if (count == 0) throw ConfigError("action grid: needs at least one point");
    ActionGrid grid;
    const double lo = constraint.lo();
    const double hi = constraint.hi();
    if (count == 1 || hi == lo) {
        grid.values = {lo};
        return grid;
    }
    grid.values.resize(count);
    for (std::size_t k = 0; k < count; ++k)
        grid.values[k] =
            lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
    grid.values.back() = hi;
    return grid;
}

double ActionGrid::spacing() const {
    if (values.size() < 2) return 0.0;
    return values[1] - values[0];
}

DpSolution dp_value(const TreeModel& tree, const ActionGrid& actions, double alpha,
                    const ClaimSpec& claim, double x0) {
    if (actions.values.empty()) throw ConfigError("dp: action grid is empty");
    if (!(alpha > 0.0)) throw ConfigError("dp: alpha must be > 0");

    const std::size_t depth = tree.depth();
    const std::size_t n_branches = tree.n_branches();

    DpSolution sol;
    sol.alpha = alpha;
    sol.x0 = x0;
    sol.horizon = tree.spec().horizon;
    sol.g.resize(depth + 1);
    sol.action.resize(depth);

    sol.g[depth].resize(tree.level_count(depth));
    for (std::size_t node = 0; node < sol.g[depth].size(); ++node)
        sol.g[depth][node] = std::exp(alpha * claim(tree.node_price(depth, node)));

    std::vector<double> weight(actions.values.size() * n_branches);
    for (std::size_t l = depth; l-- > 0;) {
        for (std::size_t a = 0; a < actions.values.size(); ++a) {
            for (std::size_t br = 0; br < n_branches; ++br) {
                weight[a * n_branches + br] =
                    tree.branch_prob(br) *
                    std::exp(-alpha * actions.values[a] * tree.tradable_increment(l, br));
            }
        }
        const std::size_t count = tree.level_count(l);
        sol.g[l].resize(count);
        sol.action[l].resize(count);
        for (std::size_t node = 0; node < count; ++node) {
            double best = std::numeric_limits<double>::infinity();
            double best_action = actions.values.front();
            for (std::size_t a = 0; a < actions.values.size(); ++a) {
                double acc = 0.0;
                for (std::size_t br = 0; br < n_branches; ++br)
                    acc += weight[a * n_branches + br] * sol.g[l + 1][tree.child(node, br)];
                if (acc < best) {  // ascending scan keeps the smallest tied action
                    best = acc;
                    best_action = actions.values[a];
                }
            }
            sol.g[l][node] = best;
            sol.action[l][node] = best_action;
        }
    }

    sol.y0 = std::log(sol.g[0][0]) / alpha;
    sol.value = -std::exp(-alpha * (x0 - sol.y0));
    return sol;
}

TreeBsdeSolution tree_bsde(const TreeModel& tree, const MarketSpec& spec,
                           const ConstraintSet& constraint, const ClaimSpec& claim) {
    const std::size_t depth = tree.depth();
    const std::size_t n_branches = tree.n_branches();
    const std::size_t n_marks = spec.jumps.count();
    const std::size_t n_reg = 1 + n_marks;
    const double dt = tree.dt();

    TreeBsdeSolution sol;
    sol.n_marks = n_marks;
    sol.y.resize(depth + 1);
    sol.z.resize(depth);
    sol.u.resize(depth);

    sol.y[depth].resize(tree.level_count(depth));
    for (std::size_t node = 0; node < sol.y[depth].size(); ++node)
        sol.y[depth][node] = claim(tree.node_price(depth, node));

    // Regressors per branch: dW and the compensated jump indicators. They do
    // not vary with the level (uniform dt), so the Gram factorization is
    // shared by all steps.
    std::vector<double> regressors(n_reg * n_branches);
    for (std::size_t br = 0; br < n_branches; ++br) {
        regressors[br] = tree.branch_dw(br);
        for (std::size_t j = 0; j < n_marks; ++j) {
            const double dn = (tree.branch_jump(br) == static_cast<int>(j) ? 1.0 : 0.0) -
                              spec.jumps.intensities[j] * dt;
            regressors[(1 + j) * n_branches + br] = dn;
        }
    }
    std::vector<double> gram(n_reg * n_reg, 0.0);
    for (std::size_t a = 0; a < n_reg; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
            double s = 0.0;
            for (std::size_t br = 0; br < n_branches; ++br)
                s += tree.branch_prob(br) * regressors[a * n_branches + br] *
                     regressors[b * n_branches + br];
            gram[a * n_reg + b] = gram[b * n_reg + a] = s;
        }
    const SmallSpd solver(gram, n_reg);

    std::vector<double> coeffs(n_reg);
    std::vector<double> u_node(n_marks);
    for (std::size_t l = depth; l-- > 0;) {
        const DriverAtStep drv(l, spec, constraint);
        const std::size_t count = tree.level_count(l);
        sol.y[l].resize(count);
        sol.z[l].resize(count);
        sol.u[l].resize(count * n_marks);
        for (std::size_t node = 0; node < count; ++node) {
            double e_y = 0.0;
            for (std::size_t br = 0; br < n_branches; ++br)
                e_y += tree.branch_prob(br) * sol.y[l + 1][tree.child(node, br)];
            for (std::size_t a = 0; a < n_reg; ++a) {
                double s = 0.0;
                for (std::size_t br = 0; br < n_branches; ++br)
                    s += tree.branch_prob(br) * sol.y[l + 1][tree.child(node, br)] *
                         regressors[a * n_branches + br];
                coeffs[a] = s;
            }
            solver.solve(coeffs);
            sol.z[l][node] = coeffs[0];
            for (std::size_t j = 0; j < n_marks; ++j) {
                u_node[j] = coeffs[1 + j];
                sol.u[l][node * n_marks + j] = u_node[j];
            }
            sol.y[l][node] = e_y + drv(sol.z[l][node], u_node).value * dt;
        }
    }
    return sol;
}

CompareReport compare(const OperatingPoint& solver_result, const OperatingPoint& oracle_result,
                      const CompareTolerances& tolerances) {
    if (solver_result.alpha != oracle_result.alpha)
        throw ConfigError("compare: risk aversion mismatch");
    if (std::abs(solver_result.horizon - oracle_result.horizon) > 1e-12)
        throw ConfigError("compare: horizon mismatch");
    if (solver_result.x0 != oracle_result.x0)
        throw ConfigError("compare: initial wealth mismatch");

    CompareReport report;
    report.v_solver =
        -std::exp(-solver_result.alpha * (solver_result.x0 - solver_result.y0));
    report.v_oracle =
        -std::exp(-oracle_result.alpha * (oracle_result.x0 - oracle_result.y0));
    report.v_gap = std::abs(report.v_solver - report.v_oracle);
    report.v_gap_rel = report.v_gap / std::max(std::abs(report.v_oracle), 1e-12);
    report.y0_gap = std::abs(solver_result.y0 - oracle_result.y0);
    report.y0_gap_rel = report.y0_gap / std::max(std::abs(oracle_result.y0), 1e-12);
    report.pi0_gap = std::abs(solver_result.pi0 - oracle_result.pi0);
    report.pass = report.v_gap <= tolerances.v_abs && report.y0_gap <= tolerances.y_abs &&
                  report.pi0_gap <= tolerances.pi_abs;
    return report;
}

}  // namespace jumpbsde
