#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "jumpbsde/driver.hpp"
#include "jumpbsde/levy_market.hpp"

namespace jumpbsde {

/// Exact scenario tree: each step crosses a Brownian proxy (+-sqrt(dt) with
/// probability 1/2) with jump outcomes {none} u {single jump of mark j}, so
/// conditional expectations are finite sums. Requires sum_j n_j dt <= 1/2 and
/// strictly positive price factors on every branch.
class TreeModel {
public:
    TreeModel(const MarketSpec& spec, std::size_t depth);

    std::size_t depth() const { return depth_; }
    std::size_t n_branches() const { return branch_dw_.size(); }
    double dt() const { return dt_; }
    const MarketSpec& spec() const { return spec_; }

    double branch_prob(std::size_t br) const { return branch_prob_[br]; }
    double branch_dw(std::size_t br) const { return branch_dw_[br]; }
    /// -1 for the no-jump branch, otherwise the mark index.
    int branch_jump(std::size_t br) const { return branch_jump_[br]; }

    /// Multiplicative price step 1 + b dt + sigma dW + sum_j beta_j dN~_j.
    double price_factor(std::size_t step, std::size_t br) const;
    /// dS/S_- seen by the wealth equation: price_factor - 1.
    double tradable_increment(std::size_t step, std::size_t br) const {
        return price_factor(step, br) - 1.0;
    }

    std::size_t level_count(std::size_t level) const;
    std::size_t child(std::size_t node, std::size_t br) const {
        return node * n_branches() + br;
    }
    double node_price(std::size_t level, std::size_t node) const {
        return prices_[level][node];
    }

    /// fp error of the per-step branch probability sum against 1.
    double prob_sum_error() const;

private:
    MarketSpec spec_;
    std::size_t depth_;
    double dt_;
    std::vector<double> branch_prob_;
    std::vector<double> branch_dw_;
    std::vector<int> branch_jump_;
    std::vector<std::vector<double>> prices_;
};

/// Finite uniform action grid covering a compact constraint set.
struct ActionGrid {
    std::vector<double> values;

    static ActionGrid uniform(const ConstraintSet& constraint, std::size_t count);
    double spacing() const;
};

/// Brute-force dynamic programming value on the tree. The exponential
/// factorization is exploited: g = exp(alpha Y) is computed per unit wealth
/// and the initial wealth enters only through the final shift.
struct DpSolution {
    double value = 0.0;  // V_0(x0)
    double y0 = 0.0;     // log(g_0) / alpha
    double x0 = 0.0;
    double alpha = 0.0;
    double horizon = 0.0;
    std::vector<std::vector<double>> g;       // levels 0..depth
    std::vector<std::vector<double>> action;  // optimal action, levels 0..depth-1
};

DpSolution dp_value(const TreeModel& tree, const ActionGrid& actions, double alpha,
                    const ClaimSpec& claim, double x0);

/// Backward BSDE solve with exact conditional expectations; Z and U are the
/// exact projections of Y_{next} on the branch increments.
struct TreeBsdeSolution {
    std::vector<std::vector<double>> y;  // levels 0..depth
    std::vector<std::vector<double>> z;  // levels 0..depth-1
    std::vector<std::vector<double>> u;  // levels 0..depth-1, node-major per mark
    std::size_t n_marks = 0;

    double u_at(std::size_t level, std::size_t node, std::size_t mark) const {
        return u[level][node * n_marks + mark];
    }
};

TreeBsdeSolution tree_bsde(const TreeModel& tree, const MarketSpec& spec,
                           const ConstraintSet& constraint, const ClaimSpec& claim);

/// One side of a solver-vs-oracle comparison.
struct OperatingPoint {
    double alpha = 0.0;
    double horizon = 0.0;
    double y0 = 0.0;
    double pi0 = 0.0;
    double x0 = 0.0;
};

struct CompareTolerances {
    double v_abs = 1e-2;
    double y_abs = 1e-2;
    double pi_abs = 5e-2;
};

struct CompareReport {
    double v_solver = 0.0;
    double v_oracle = 0.0;
    double v_gap = 0.0;
    double v_gap_rel = 0.0;
    double y0_gap = 0.0;
    double y0_gap_rel = 0.0;
    double pi0_gap = 0.0;
    bool pass = false;
};

/// Guards alpha/horizon/x0 equality, then reports absolute gaps for V_0, Y_0
/// and pi*_0 against the tolerances.
CompareReport compare(const OperatingPoint& solver_result, const OperatingPoint& oracle_result,
                      const CompareTolerances& tolerances);

}  // namespace jumpbsde
