#include "jumpbsde/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "jumpbsde/control.hpp"
#include "jumpbsde/driver.hpp"
#include "jumpbsde/oracle_dp.hpp"

namespace jumpbsde {

namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- parsing

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError(path + ": " + message);
}

const ordered_json& require(const ordered_json& j, const std::string& key,
                            const std::string& path) {
    if (!j.contains(key)) fail(path + "." + key, "missing required field");
    return j.at(key);
}

double as_number(const ordered_json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

StepFunction parse_step_function(const ordered_json& j, const std::string& path) {
    if (j.is_number()) return StepFunction(j.get<double>());
    if (j.is_array()) {
        std::vector<double> vals;
        for (std::size_t i = 0; i < j.size(); ++i)
            vals.push_back(as_number(j.at(i), path + "[" + std::to_string(i) + "]"));
        if (vals.empty()) fail(path, "array must not be empty");
        return StepFunction(std::move(vals));
    }
    fail(path, "expected a number or an array of per-step numbers");
}

ClaimSpec parse_claim(const ordered_json& j, const std::string& path) {
    ClaimSpec claim;
    const std::string type = require(j, "type", path).get<std::string>();
    if (type == "constant") {
        claim.kind = ClaimSpec::Kind::Constant;
        claim.value = as_number(require(j, "value", path), path + ".value");
    } else if (type == "call") {
        claim.kind = ClaimSpec::Kind::CappedCall;
        claim.strike = as_number(require(j, "strike", path), path + ".strike");
        claim.cap = as_number(require(j, "cap", path), path + ".cap");
    } else if (type == "put") {
        claim.kind = ClaimSpec::Kind::Put;
        claim.strike = as_number(require(j, "strike", path), path + ".strike");
    } else {
        fail(path + ".type", "unknown claim type '" + type + "'");
    }
    claim.validate();
    return claim;
}

ConstraintSet parse_constraint(const ordered_json& j, const std::string& path) {
    const std::string kind = require(j, "kind", path).get<std::string>();
    if (kind == "interval")
        return ConstraintSet::interval(as_number(require(j, "lo", path), path + ".lo"),
                                       as_number(require(j, "hi", path), path + ".hi"));
    if (kind == "half_line_up")
        return ConstraintSet::half_line_up(as_number(require(j, "lo", path), path + ".lo"));
    if (kind == "half_line_down")
        return ConstraintSet::half_line_down(as_number(require(j, "hi", path), path + ".hi"));
    if (kind == "whole_line") return ConstraintSet::whole_line();
    fail(path + ".kind", "unknown constraint kind '" + kind + "'");
}

MarketSpec parse_market(const ordered_json& j, const std::string& path) {
    MarketSpec market;
    market.b = parse_step_function(require(j, "b", path), path + ".b");
    market.sigma = parse_step_function(require(j, "sigma", path), path + ".sigma");
    market.alpha = as_number(require(j, "alpha", path), path + ".alpha");
    market.horizon = as_number(require(j, "T", path), path + ".T");
    if (j.contains("s0")) market.s0 = as_number(j.at("s0"), path + ".s0");
    if (j.contains("sigma_min"))
        market.sigma_min = as_number(j.at("sigma_min"), path + ".sigma_min");

    if (j.contains("marks") || j.contains("intensities") || j.contains("beta")) {
        const ordered_json& marks = require(j, "marks", path);
        const ordered_json& intensities = require(j, "intensities", path);
        const ordered_json& beta = require(j, "beta", path);
        if (!marks.is_array() || !intensities.is_array() || !beta.is_array())
            fail(path, "marks, intensities and beta must be arrays");
        for (std::size_t k = 0; k < marks.size(); ++k)
            market.jumps.marks.push_back(
                as_number(marks.at(k), path + ".marks[" + std::to_string(k) + "]"));
        for (std::size_t k = 0; k < intensities.size(); ++k)
            market.jumps.intensities.push_back(as_number(
                intensities.at(k), path + ".intensities[" + std::to_string(k) + "]"));
        for (std::size_t k = 0; k < beta.size(); ++k)
            market.beta.push_back(
                parse_step_function(beta.at(k), path + ".beta[" + std::to_string(k) + "]"));
    }

    market.claim = parse_claim(require(j, "claim", path), path + ".claim");
    market.constraint = parse_constraint(require(j, "constraint", path), path + ".constraint");
    return market;
}

ordered_json step_function_to_json(const StepFunction& f) {
    if (f.is_constant()) return f.values()[0];
    return ordered_json(f.values());
}

ordered_json claim_to_json(const ClaimSpec& claim) {
    ordered_json j;
    switch (claim.kind) {
        case ClaimSpec::Kind::Constant:
            j["type"] = "constant";
            j["value"] = claim.value;
            break;
        case ClaimSpec::Kind::CappedCall:
            j["type"] = "call";
            j["strike"] = claim.strike;
            j["cap"] = claim.cap;
            break;
        case ClaimSpec::Kind::Put:
            j["type"] = "put";
            j["strike"] = claim.strike;
            break;
    }
    return j;
}

ordered_json constraint_to_json(const ConstraintSet& c) {
    ordered_json j;
    switch (c.kind()) {
        case ConstraintKind::Interval:
            j["kind"] = "interval";
            j["lo"] = c.lo();
            j["hi"] = c.hi();
            break;
        case ConstraintKind::HalfLineUp:
            j["kind"] = "half_line_up";
            j["lo"] = c.lo();
            break;
        case ConstraintKind::HalfLineDown:
            j["kind"] = "half_line_down";
            j["hi"] = c.hi();
            break;
        case ConstraintKind::WholeLine:
            j["kind"] = "whole_line";
            break;
    }
    return j;
}

ordered_json config_to_json_object(const RunConfig& cfg) {
    ordered_json market;
    market["b"] = step_function_to_json(cfg.market.b);
    market["sigma"] = step_function_to_json(cfg.market.sigma);
    if (cfg.market.jumps.count() > 0) {
        market["marks"] = cfg.market.jumps.marks;
        market["intensities"] = cfg.market.jumps.intensities;
        ordered_json beta = ordered_json::array();
        for (const auto& bj : cfg.market.beta) beta.push_back(step_function_to_json(bj));
        market["beta"] = beta;
    }
    market["alpha"] = cfg.market.alpha;
    market["T"] = cfg.market.horizon;
    market["s0"] = cfg.market.s0;
    market["sigma_min"] = cfg.market.sigma_min;
    market["claim"] = claim_to_json(cfg.market.claim);
    market["constraint"] = constraint_to_json(cfg.market.constraint);

    ordered_json j;
    j["market"] = market;
    j["x0"] = cfg.x0;
    j["grid"] = {{"steps", cfg.grid.steps}, {"paths", cfg.grid.paths}, {"seed", cfg.grid.seed}};
    j["solver"] = {{"basis_degree", cfg.solver.regression.basis_degree},
                   {"ridge", cfg.solver.regression.ridge},
                   {"min_paths_per_fit", cfg.solver.regression.min_paths_per_fit},
                   {"ladder_levels", cfg.solver.ladder_levels},
                   {"ladder_mode", cfg.solver.ladder_mode == LadderMode::CompactTruncation
                                       ? "compact"
                                       : "constraint"}};
    j["oracle"] = {{"depth", cfg.oracle.depth}, {"action_grid", cfg.oracle.action_grid}};
    j["x_grid"] = cfg.x_grid;
    return j;
}

// ------------------------------------------------------------- formatting

std::string fmt(double v) {
    if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double sanitize(double v) { return std::isfinite(v) ? v : 0.0; }

class CsvBuilder {
public:
    explicit CsvBuilder(std::vector<std::string> columns) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (c) out_ += ',';
            out_ += columns[c];
        }
        out_ += '\n';
    }

    void row(std::span<const double> values) {
        for (std::size_t c = 0; c < values.size(); ++c) {
            if (c) out_ += ',';
            out_ += fmt(values[c]);
        }
        out_ += '\n';
    }

    const std::string& str() const { return out_; }

private:
    std::string out_;
};

// ------------------------------------------------------------- plumbing

class DirLock {
public:
    explicit DirLock(const fs::path& dir) : path_(dir / ".jumpbsde.lock") {
        fs::create_directories(dir);
        std::FILE* f = std::fopen(path_.string().c_str(), "wx");
        if (f == nullptr)
            throw ConfigError("output directory is locked by another run: " + path_.string());
        std::fclose(f);
    }
    ~DirLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    fs::path path_;
};

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << content;
}

struct Artifacts {
    ordered_json summary;
    std::string series_csv;
    std::vector<std::string> report_lines;
    int exit_code = 0;
};

struct CheckLine {
    std::string name;
    bool pass;
    std::string detail;
    bool gate = true;
};

void append_checks(Artifacts& art, std::span<const CheckLine> checks) {
    ordered_json verdicts;
    for (const CheckLine& c : checks) {
        verdicts[c.name] = c.pass;
        art.report_lines.push_back(std::string(c.pass ? "[PASS] " : "[FAIL] ") + c.name +
                                   (c.detail.empty() ? "" : ": " + c.detail));
        if (c.gate && !c.pass) art.exit_code = 1;
    }
    art.summary["results"]["checks"] = verdicts;
}

double mean_unflagged(std::span<const double> row, std::span<const std::uint8_t> flagged) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < row.size(); ++p) {
        if (!flagged.empty() && flagged[p]) continue;
        s += row[p];
        ++n;
    }
    return n ? s / static_cast<double>(n) : 0.0;
}

struct RowStats {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
};

RowStats row_stats(std::span<const double> row, std::span<const std::uint8_t> flagged) {
    RowStats st;
    st.min = std::numeric_limits<double>::infinity();
    st.max = -std::numeric_limits<double>::infinity();
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < row.size(); ++p) {
        if (!flagged.empty() && flagged[p]) continue;
        s += row[p];
        st.min = std::min(st.min, row[p]);
        st.max = std::max(st.max, row[p]);
        ++n;
    }
    if (n == 0) return {};
    st.mean = s / static_cast<double>(n);
    return st;
}

// ------------------------------------------------------- shared pipeline

struct SolveBundle {
    TimeGrid grid;
    PathBundle bundle;
    PricePaths prices;
    BsdeSolution solution;
    StrategyPath strategy;

    SolveBundle(const RunConfig& cfg, const MarketSpec& market)
        : grid(TimeGrid::uniform(market.horizon, cfg.grid.steps)),
          bundle(simulate_paths(market, grid, cfg.grid.paths, cfg.grid.seed)),
          prices(evolve_price(bundle, market)),
          solution(solve_bsde(bundle, prices, market, market.constraint,
                              cfg.solver.regression, {})),
          strategy(optimal_strategy(solution, market, market.constraint)) {}
};

void fill_solve_series(CsvBuilder& csv, const TimeGrid& grid, const BsdeSolution& sol,
                       const StrategyPath& strategy, const MarketSpec& market) {
    const std::size_t n_steps = grid.steps();
    const std::size_t n_paths = sol.y.paths();
    for (std::size_t i = 0; i <= n_steps; ++i) {
        const RowStats y = row_stats(sol.y.row(i), sol.flagged);
        double mean_abs_z = 0.0;
        double mean_norm_u = 0.0;
        RowStats pi;
        if (i < n_steps) {
            std::size_t n = 0;
            double sz = 0.0, su = 0.0;
            for (std::size_t p = 0; p < n_paths; ++p) {
                if (sol.flagged[p]) continue;
                sz += std::abs(sol.z.at(i, p));
                double l2 = 0.0;
                for (std::size_t j = 0; j < sol.u.size(); ++j)
                    l2 += sol.u[j].at(i, p) * sol.u[j].at(i, p) *
                          market.jumps.intensities[j];
                su += std::sqrt(l2);
                ++n;
            }
            if (n) {
                mean_abs_z = sz / static_cast<double>(n);
                mean_norm_u = su / static_cast<double>(n);
            }
            pi = row_stats(strategy.values.row(i), sol.flagged);
        }
        const double row[] = {grid.nodes[i], y.mean,   y.min, y.max, mean_abs_z,
                              mean_norm_u,   pi.mean, pi.min, pi.max};
        csv.row(row);
    }
}

ordered_json diagnostics_to_json(const BsdeSolution& sol) {
    ordered_json d;
    d["min_y"] = sanitize(sol.diagnostics.min_y);
    d["max_y"] = sanitize(sol.diagnostics.max_y);
    d["max_abs_u"] = sanitize(sol.diagnostics.max_abs_u);
    d["preclamp_excess_high"] = sanitize(sol.diagnostics.preclamp_excess_high);
    d["preclamp_excess_low"] = sanitize(sol.diagnostics.preclamp_excess_low);
    d["max_clamp_tol"] = sanitize(sol.diagnostics.max_clamp_tol);
    d["bounds_ok"] = sol.diagnostics.bounds_ok;
    d["flagged_paths"] = sol.diagnostics.flagged_paths;
    d["max_residual_rms"] = sanitize(sol.diagnostics.max_residual_rms);
    return d;
}

// --------------------------------------------------------- subcommands

Artifacts run_simulate(const RunConfig& cfg) {
    const MarketSpec& market = cfg.market;
    const TimeGrid grid = TimeGrid::uniform(market.horizon, cfg.grid.steps);
    const PathBundle bundle = simulate_paths(market, grid, cfg.grid.paths, cfg.grid.seed);
    const PricePaths prices = evolve_price(bundle, market);

    Artifacts art;
    CsvBuilder csv({"t", "mean_S", "min_S", "max_S", "mean_dW", "var_dW", "mean_dN_total"});
    const std::size_t n_paths = bundle.n_paths();
    for (std::size_t i = 0; i <= grid.steps(); ++i) {
        const RowStats s = row_stats(prices.values.row(i), prices.flagged);
        double mean_dw = 0.0, var_dw = 0.0, mean_dn = 0.0;
        if (i < grid.steps()) {
            for (std::size_t p = 0; p < n_paths; ++p) mean_dw += bundle.dw(i, p);
            mean_dw /= static_cast<double>(n_paths);
            for (std::size_t p = 0; p < n_paths; ++p)
                var_dw += (bundle.dw(i, p) - mean_dw) * (bundle.dw(i, p) - mean_dw);
            var_dw /= static_cast<double>(n_paths);
            for (std::size_t j = 0; j < bundle.n_marks(); ++j)
                for (std::size_t p = 0; p < n_paths; ++p)
                    mean_dn += static_cast<double>(bundle.dn(i, j, p));
            mean_dn /= static_cast<double>(n_paths);
        }
        const double row[] = {grid.nodes[i], s.mean, s.min, s.max, mean_dw, var_dw, mean_dn};
        csv.row(row);
    }
    art.series_csv = csv.str();

    ordered_json res;
    res["n_paths"] = n_paths;
    res["flagged_paths"] = prices.flagged_count;
    ordered_json marks = ordered_json::array();
    for (std::size_t j = 0; j < bundle.n_marks(); ++j) {
        double total = 0.0;
        double expected = 0.0;
        for (std::size_t i = 0; i < grid.steps(); ++i) {
            expected += market.jumps.intensities[j] * grid.dt(i);
            for (std::size_t p = 0; p < n_paths; ++p)
                total += static_cast<double>(bundle.dn(i, j, p));
        }
        marks.push_back({{"mark", market.jumps.marks[j]},
                         {"mean_count_per_path", total / static_cast<double>(n_paths)},
                         {"expected_count_per_path", expected}});
    }
    res["jump_counts"] = marks;
    art.summary["results"] = res;
    art.report_lines.push_back("simulate: " + std::to_string(n_paths) + " paths, " +
                               std::to_string(grid.steps()) + " steps, flagged " +
                               std::to_string(prices.flagged_count));
    return art;
}

void require_compact(const MarketSpec& market, const std::string& subcommand) {
    if (!market.constraint.compact())
        throw ConfigError(subcommand +
                          ": needs a compact constraint set; non-compact sets run through "
                          "the `ladder` subcommand in constraint mode");
}

Artifacts run_solve(const RunConfig& cfg) {
    const MarketSpec& market = cfg.market;
    require_compact(market, "solve");
    const MarketSpec& solve_market = market;

    SolveBundle sb(cfg, solve_market);
    const BsdeSolution& sol = sb.solution;

    const NormEquivalenceReport norm = norm_equivalence_check(sol, solve_market);
    const BmoReport bmo =
        bmo_diagnostic(sol, sb.prices, solve_market, cfg.solver.regression);

    Artifacts art;
    CsvBuilder csv({"t", "mean_Y", "min_Y", "max_Y", "mean_abs_Z", "mean_norm_U", "pi_mean",
                    "pi_min", "pi_max"});
    fill_solve_series(csv, sb.grid, sol, sb.strategy, solve_market);
    art.series_csv = csv.str();

    const double y0 = sol.y0_mean();
    ordered_json res;
    res["y0"] = y0;
    res["x0"] = cfg.x0;
    res["v0_at_x0"] = value_function(y0, cfg.x0, market.alpha);
    ordered_json table = ordered_json::array();
    for (double x : cfg.x_grid)
        table.push_back({{"x", x}, {"v", value_function(y0, x, market.alpha)}});
    res["value_table"] = table;
    res["pi0_mean"] = mean_unflagged(sb.strategy.values.row(0), sol.flagged);
    res["bounds"] = {{"c1", sol.bounds.c1},
                     {"c2", sol.bounds.c2},
                     {"c3_estimate", sol.bounds.c3_estimate}};
    res["diagnostics"] = diagnostics_to_json(sol);
    res["norm_equivalence"] = {{"violations", norm.violations},
                               {"c_lower", norm.c_lower},
                               {"c_upper", norm.c_upper},
                               {"k_used", sanitize(norm.k_used)}};
    res["bmo"] = {{"c3_estimate", bmo.c3_estimate}, {"steps_exceeding", bmo.steps_exceeding}};
    art.summary["results"] = res;

    const CheckLine checks[] = {
        {"bounds_within_clamp_band", sol.diagnostics.bounds_ok,
         "pre-clamp excess high " + fmt(sol.diagnostics.preclamp_excess_high) + ", low " +
             fmt(sol.diagnostics.preclamp_excess_low)},
        {"norm_equivalence", norm.ok(), std::to_string(norm.violations) + " violations"},
        {"bmo_tail_bound", bmo.ok(),
         std::to_string(bmo.steps_exceeding) + " steps above C3 (report only)", false},
    };
    append_checks(art, checks);
    art.report_lines.push_back("solve: Y0 = " + fmt(y0) + ", V0(x0) = " +
                               fmt(value_function(y0, cfg.x0, market.alpha)));
    return art;
}

Artifacts run_ladder(const RunConfig& cfg) {
    const MarketSpec& market = cfg.market;
    const LadderMode mode = cfg.solver.ladder_mode;

    std::vector<double> levels = cfg.solver.ladder_levels;
    if (levels.empty()) {
        if (mode == LadderMode::CompactTruncation) {
            const double m0 = std::max(truncation_floor(market), 1.0);
            levels = {m0, m0 + 1.0, m0 + 3.0};
        } else {
            levels = {1.0, 2.0, 4.0};
        }
    }

    if (mode == LadderMode::CompactTruncation && !market.constraint.compact())
        throw ConfigError("ladder: compact mode needs a compact constraint set");

    const TimeGrid grid = TimeGrid::uniform(market.horizon, cfg.grid.steps);
    const PathBundle bundle = simulate_paths(market, grid, cfg.grid.paths, cfg.grid.seed);
    const PricePaths prices = evolve_price(bundle, market);

    const LadderResult ladder = solve_sequence(mode, levels, bundle, prices, market,
                                               market.constraint, cfg.solver.regression);

    Artifacts art;
    std::vector<std::string> cols{"t"};
    for (std::size_t l = 0; l < levels.size(); ++l)
        cols.push_back("mean_Y_L" + std::to_string(l));
    CsvBuilder csv(cols);
    std::vector<double> row(cols.size());
    for (std::size_t i = 0; i <= grid.steps(); ++i) {
        row[0] = grid.nodes[i];
        for (std::size_t l = 0; l < ladder.solutions.size(); ++l)
            row[1 + l] =
                mean_unflagged(ladder.solutions[l].y.row(i), ladder.solutions[l].flagged);
        csv.row(row);
    }
    art.series_csv = csv.str();

    const double tol = mode == LadderMode::CompactTruncation ? 1e-6 : 1e-3;
    ordered_json res;
    res["mode"] = mode == LadderMode::CompactTruncation ? "compact" : "constraint";
    res["levels"] = levels;
    res["y0_mean"] = ladder.report.y0_mean;
    ordered_json v0 = ordered_json::array();
    for (double y0 : ladder.report.y0_mean)
        v0.push_back(value_function(y0, cfg.x0, market.alpha));
    res["v0"] = v0;
    res["y_gap_sup"] = ladder.report.y_gap_sup;
    res["z_dist_l2"] = ladder.report.z_dist_l2;
    res["u_dist_l2"] = ladder.report.u_dist_l2;
    res["worst_mean_violation"] = sanitize(ladder.report.worst_mean_violation);
    res["worst_pathwise_violation"] = sanitize(ladder.report.worst_pathwise_violation);
    art.summary["results"] = res;

    const CheckLine checks[] = {
        {"ladder_monotone", ladder.report.monotone_ok(tol),
         "worst per-step mean violation " + fmt(ladder.report.worst_mean_violation) +
             " (tol " + fmt(tol) + ")"},
    };
    append_checks(art, checks);
    art.report_lines.push_back("ladder: levels " + std::to_string(levels.size()) +
                               ", last Y0 = " + fmt(ladder.report.y0_mean.back()));
    return art;
}

Artifacts run_oracle(const RunConfig& cfg) {
    const MarketSpec& market = cfg.market;
    require_compact(market, "oracle");
    const bool per_step_coeffs = !market.b.is_constant() || !market.sigma.is_constant() ||
                                 std::any_of(market.beta.begin(), market.beta.end(),
                                             [](const StepFunction& f) {
                                                 return !f.is_constant();
                                             });
    if (per_step_coeffs && cfg.grid.steps != cfg.oracle.depth)
        throw ConfigError("oracle: per-step coefficients need grid.steps == oracle.depth");

    const TreeModel tree(market, cfg.oracle.depth);
    const ActionGrid actions = ActionGrid::uniform(market.constraint, cfg.oracle.action_grid);
    const DpSolution dp = dp_value(tree, actions, market.alpha, market.claim, cfg.x0);
    const TreeBsdeSolution tb = tree_bsde(tree, market, market.constraint, market.claim);

    const double v_from_tree_bsde = -std::exp(-market.alpha * (cfg.x0 - tb.y[0][0]));
    const double theorem_gap = std::abs(dp.value - v_from_tree_bsde);

    // Monte Carlo solver on the matched grid.
    RunConfig mc_cfg = cfg;
    mc_cfg.grid.steps = cfg.oracle.depth;
    SolveBundle sb(mc_cfg, market);
    const double y0_mc = sb.solution.y0_mean();
    const double pi0_mc = mean_unflagged(sb.strategy.values.row(0), sb.solution.flagged);

    OperatingPoint solver_pt{market.alpha, market.horizon, y0_mc, pi0_mc, cfg.x0};
    OperatingPoint oracle_pt{market.alpha, market.horizon, tb.y[0][0], dp.action[0][0], cfg.x0};
    const CompareReport cmp = compare(solver_pt, oracle_pt, {});

    const TreeDriftReport drift = tree_supermartingale_check(tree, dp, actions.values);

    Artifacts art;
    CsvBuilder csv({"t", "tree_mean_Y", "solver_mean_Y"});
    // probability-weighted tree means next to the matched solver means
    std::vector<double> level_prob{1.0};
    for (std::size_t l = 0; l <= tree.depth(); ++l) {
        double mean_y = 0.0;
        for (std::size_t node = 0; node < tree.level_count(l); ++node)
            mean_y += level_prob[node] * tb.y[l][node];
        const double row[] = {static_cast<double>(l) * tree.dt(), mean_y,
                              mean_unflagged(sb.solution.y.row(l), sb.solution.flagged)};
        csv.row(row);
        if (l < tree.depth()) {
            std::vector<double> next(tree.level_count(l + 1));
            for (std::size_t node = 0; node < tree.level_count(l); ++node)
                for (std::size_t br = 0; br < tree.n_branches(); ++br)
                    next[tree.child(node, br)] = level_prob[node] * tree.branch_prob(br);
            level_prob = std::move(next);
        }
    }
    art.series_csv = csv.str();

    ordered_json res;
    res["dp_value"] = dp.value;
    res["dp_y0"] = dp.y0;
    res["tree_bsde_y0"] = tb.y[0][0];
    res["tree_bsde_value"] = v_from_tree_bsde;
    res["theorem_gap"] = theorem_gap;
    res["solver_y0"] = y0_mc;
    res["solver_pi0"] = pi0_mc;
    res["oracle_pi0"] = dp.action[0][0];
    res["compare"] = {{"v_gap", cmp.v_gap},   {"y0_gap", cmp.y0_gap},
                      {"pi0_gap", cmp.pi0_gap}, {"pass", cmp.pass}};
    res["drift"] = {{"scale", drift.scale},
                    {"worst_optimal_abs_gap", drift.worst_optimal_abs_gap},
                    {"min_suboptimal_gap", drift.min_suboptimal_gap},
                    {"n_nodes", drift.n_nodes}};
    art.summary["results"] = res;

    const CheckLine checks[] = {
        {"theorem_value_identity", theorem_gap <= 1e-2,
         "|dp - (-exp(-alpha(x0 - Y0_tree)))| = " + fmt(theorem_gap)},
        {"solver_matches_tree", cmp.y0_gap <= 1e-2, "Y0 gap " + fmt(cmp.y0_gap)},
        {"tree_supermartingale",
         drift.optimal_ok(1e-9) && drift.suboptimal_ok(1e-9),
         "optimal gap " + fmt(drift.worst_optimal_abs_gap) + ", min suboptimal gap " +
             fmt(drift.min_suboptimal_gap)},
    };
    append_checks(art, checks);
    art.report_lines.push_back("oracle: dp value " + fmt(dp.value) + ", tree Y0 " +
                               fmt(tb.y[0][0]) + ", solver Y0 " + fmt(y0_mc));
    return art;
}

Artifacts run_verify(const RunConfig& cfg) {
    const MarketSpec& market = cfg.market;
    require_compact(market, "verify");
    const ConstraintSet& working = market.constraint;
    const MarketSpec& solve_market = market;

    std::vector<CheckLine> checks;

    // (H1) sweep
    const auto h1_pts =
        make_driver_samples(market.jumps.count(), 10000, 5.0, 2.0, cfg.grid.steps,
                            cfg.grid.seed ^ 0x48315357u);
    const H1Report h1 = check_H1(solve_market, working, h1_pts);
    checks.push_back({"h1_sweep", h1.ok(),
                      std::to_string(h1.n_points) + " points, " +
                          std::to_string(h1.lower_violations + h1.upper_violations) +
                          " violations"});

    // (H2) gamma / lambda sweeps
    std::size_t h2_bad = 0;
    double worst_lambda_slack = std::numeric_limits<double>::infinity();
    const auto pts_a = make_driver_samples(market.jumps.count(), 1000, 3.0, 1.5,
                                           cfg.grid.steps, cfg.grid.seed ^ 0x67616d31u);
    const auto pts_b = make_driver_samples(market.jumps.count(), 1000, 3.0, 1.5,
                                           cfg.grid.steps, cfg.grid.seed ^ 0x67616d32u);
    for (std::size_t k = 0; k < pts_a.size(); ++k) {
        const H2Coefficients h2 =
            h2_coefficients(pts_a[k].t_index, pts_a[k].z, pts_b[k].z, pts_a[k].u, pts_b[k].u,
                            solve_market, working);
        worst_lambda_slack =
            std::min(worst_lambda_slack, h2.lambda_bound - std::abs(h2.lambda));
        if (std::abs(h2.lambda) > h2.lambda_bound + 1e-9) ++h2_bad;
        for (double g : h2.gamma) {
            if (!(g > -1.0)) ++h2_bad;
            if (g < h2.delta_lower - 1e-12 || g > h2.c_upper + 1e-12) ++h2_bad;
        }
    }
    checks.push_back({"h2_gamma_lambda", h2_bad == 0,
                      std::to_string(pts_a.size()) + " pairs, " + std::to_string(h2_bad) +
                          " violations, min lambda slack " + fmt(worst_lambda_slack)});

    // main solve and its diagnostics
    SolveBundle sb(cfg, solve_market);
    const BsdeSolution& sol = sb.solution;

    const double sandwich_excess =
        std::max(sol.diagnostics.preclamp_excess_high, sol.diagnostics.preclamp_excess_low);
    checks.push_back({"bounds_sandwich", sandwich_excess <= 0.02,
                      "worst pre-clamp excess " + fmt(sandwich_excess) + " (tol 0.02)"});

    double terminal_gap = 0.0;
    for (std::size_t p = 0; p < sb.bundle.n_paths(); ++p) {
        if (sol.flagged[p]) continue;
        const double b = solve_market.claim(sb.prices.values.at(cfg.grid.steps, p));
        terminal_gap = std::max(terminal_gap, std::abs(sol.y.at(cfg.grid.steps, p) - b));
    }
    checks.push_back({"terminal_exactness", terminal_gap == 0.0, "max gap " + fmt(terminal_gap)});

    const NormEquivalenceReport norm = norm_equivalence_check(sol, solve_market);
    checks.push_back({"norm_equivalence", norm.ok(),
                      std::to_string(norm.violations) + " violations over " +
                          std::to_string(norm.n_checked) + " points"});

    const double u_bound =
        2.0 * std::max(std::abs(sol.bounds.c1), std::abs(sol.bounds.c2)) +
        3.0 * sol.diagnostics.max_clamp_tol;
    checks.push_back({"jump_component_bound", sol.diagnostics.max_abs_u <= u_bound + 1e-12,
                      "max |U| " + fmt(sol.diagnostics.max_abs_u) + " vs 2(|C1| v |C2|) + tol " +
                          fmt(u_bound) + ", pre-clamp excess " +
                          fmt(sol.diagnostics.preclamp_u_excess)});

    // comparison: constant claims 0 and 1/2 on the common bundle
    {
        MarketSpec m1 = solve_market;
        m1.claim = ClaimSpec{ClaimSpec::Kind::Constant, 0.0};
        MarketSpec m2 = solve_market;
        m2.claim = ClaimSpec{ClaimSpec::Kind::Constant, 0.5};
        const BsdeSolution s1 =
            solve_bsde(sb.bundle, sb.prices, m1, working, cfg.solver.regression, {});
        const BsdeSolution s2 =
            solve_bsde(sb.bundle, sb.prices, m2, working, cfg.solver.regression, {});
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i <= cfg.grid.steps; ++i)
            for (std::size_t p = 0; p < sb.bundle.n_paths(); ++p)
                if (!s1.flagged[p])
                    worst = std::max(worst, s1.y.at(i, p) - s2.y.at(i, p));
        const double shift = s2.y0_mean() - s1.y0_mean();
        checks.push_back({"comparison_pathwise", worst <= 1e-3,
                          "max(Y1 - Y2) = " + fmt(worst) + " (tol 1e-3)"});
        checks.push_back({"comparison_translation", std::abs(shift - 0.5) <= 1e-2,
                          "Y0 shift " + fmt(shift) + " for a 0.5 cash claim"});
    }

    // martingale structure along the optimum, supermartingale at pi = 0
    {
        const WealthPaths wealth =
            evolve_wealth(sb.bundle, solve_market, sb.strategy.values, cfg.x0);
        const RProcess r_opt = r_process(sb.strategy, sol, wealth, sb.bundle, solve_market,
                                         working);
        // per-step bands widened by the scheme-resolution bias of the
        // estimated Y (does not shrink with the path count)
        const double bias_rel = 2e-3;
        const MartingaleReport mart_opt = martingale_test(
            r_opt, sb.bundle, sb.prices, cfg.solver.regression, 4.0, bias_rel);
        checks.push_back({"martingale_at_optimum", mart_opt.martingale_ok(),
                          std::to_string(mart_opt.steps_outside_band) +
                              " steps outside the CLT band"});
        checks.push_back({"a_increments_optimal", r_opt.max_a_increment <= 1e-9,
                          "max dA along pi* = " + fmt(r_opt.max_a_increment)});

        if (working.contains(0.0)) {
            const StrategyPath zero =
                constant_strategy(0.0, cfg.grid.steps, cfg.grid.paths, working);
            const WealthPaths w0 = evolve_wealth(sb.bundle, solve_market, zero.values, cfg.x0);
            const RProcess r0 = r_process(zero, sol, w0, sb.bundle, solve_market, working);
            const MartingaleReport mart0 = martingale_test(
                r0, sb.bundle, sb.prices, cfg.solver.regression, 4.0, bias_rel);
            checks.push_back({"supermartingale_at_zero", mart0.supermartingale_ok(),
                              std::to_string(mart0.steps_above_band) +
                                  " steps with significant positive drift"});
            checks.push_back({"a_increments_nonnegative", r0.min_a_increment >= -1e-9,
                              "min dA = " + fmt(r0.min_a_increment)});
            if (solve_market.theta_sup() > 0.0) {
                // Statistical power depends on the instance and path count,
                // so this line informs rather than gates.
                checks.push_back({"strict_drift_at_zero", mart0.strictly_negative_total(),
                                  "total drift " + fmt(mart0.total_drift_mean) + " (se " +
                                      fmt(mart0.total_drift_se) + ")",
                                  false});
            }
        }
    }

    // exact dichotomy on a small tree
    try {
        const TreeModel tree(market, cfg.oracle.depth);
        const ActionGrid actions =
            ActionGrid::uniform(market.constraint, cfg.oracle.action_grid);
        const DpSolution dp = dp_value(tree, actions, market.alpha, market.claim, cfg.x0);
        const TreeDriftReport drift = tree_supermartingale_check(tree, dp, actions.values);
        checks.push_back({"tree_dichotomy",
                          drift.optimal_ok(1e-9) && drift.suboptimal_ok(1e-9),
                          "optimal gap " + fmt(drift.worst_optimal_abs_gap) +
                              ", min suboptimal gap " + fmt(drift.min_suboptimal_gap)});
    } catch (const ConfigError& e) {
        checks.push_back(
            {"tree_dichotomy", true, std::string("skipped: ") + e.what(), false});
    }

    const BmoReport bmo = bmo_diagnostic(sol, sb.prices, solve_market, cfg.solver.regression);
    checks.push_back({"bmo_tail_bound", bmo.ok(),
                      std::to_string(bmo.steps_exceeding) + " steps above C3 (report only)",
                      false});

    Artifacts art;
    CsvBuilder csv({"t", "mean_Y", "min_Y", "max_Y", "mean_abs_Z", "mean_norm_U", "pi_mean",
                    "pi_min", "pi_max"});
    fill_solve_series(csv, sb.grid, sol, sb.strategy, solve_market);
    art.series_csv = csv.str();
    art.summary["results"]["y0"] = sol.y0_mean();
    append_checks(art, checks);
    return art;
}

Artifacts run_value(const RunConfig& cfg) {
    const MarketSpec& market = cfg.market;
    const ConstraintSet working = market.constraint.compact()
                                      ? market.constraint
                                      : market.constraint.truncate(1e6);
    MarketSpec solve_market = market;
    solve_market.constraint = working;

    SolveBundle sb(cfg, solve_market);
    const double y0 = sb.solution.y0_mean();

    std::vector<double> xs = cfg.x_grid;
    if (xs.empty()) {
        for (int k = -10; k <= 10; ++k) xs.push_back(0.2 * k);
    }

    Artifacts art;
    CsvBuilder csv({"t", "mean_Y", "min_Y", "max_Y", "mean_abs_Z", "mean_norm_U", "pi_mean",
                    "pi_min", "pi_max"});
    fill_solve_series(csv, sb.grid, sb.solution, sb.strategy, solve_market);
    art.series_csv = csv.str();

    ordered_json table = ordered_json::array();
    for (double x : xs)
        table.push_back({{"x", x}, {"v", value_function(y0, x, market.alpha)}});
    art.summary["results"]["y0"] = y0;
    art.summary["results"]["value_table"] = table;
    art.report_lines.push_back("value: Y0 = " + fmt(y0) + ", table of " +
                               std::to_string(xs.size()) + " wealth points");
    return art;
}

}  // namespace

void RunConfig::validate() const {
    market.validate();
    if (grid.steps == 0) throw ConfigError("grid.steps: must be >= 1");
    if (grid.paths == 0) throw ConfigError("grid.paths: must be >= 1");
    solver.regression.validate();
    const auto check_len = [&](const StepFunction& f, const std::string& name) {
        if (!f.is_constant() && f.size() != grid.steps)
            throw ConfigError(name + ": per-step array must have grid.steps = " +
                              std::to_string(grid.steps) + " entries");
    };
    check_len(market.b, "market.b");
    check_len(market.sigma, "market.sigma");
    for (std::size_t j = 0; j < market.beta.size(); ++j)
        check_len(market.beta[j], "market.beta[" + std::to_string(j) + "]");
    if (oracle.depth == 0) throw ConfigError("oracle.depth: must be >= 1");
    if (oracle.action_grid == 0) throw ConfigError("oracle.action_grid: must be >= 1");
    for (std::size_t k = 0; k + 1 < solver.ladder_levels.size(); ++k)
        if (!(solver.ladder_levels[k] < solver.ladder_levels[k + 1]))
            throw ConfigError("solver.ladder_levels: must strictly increase");
}

RunConfig parse_config_text(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON (") + e.what() + ")");
    }

    RunConfig cfg;
    try {
        cfg.market = parse_market(require(j, "market", "config"), "market");
        if (j.contains("x0")) cfg.x0 = as_number(j.at("x0"), "x0");
        if (j.contains("grid")) {
            const ordered_json& g = j.at("grid");
            if (g.contains("steps")) cfg.grid.steps = g.at("steps").get<std::size_t>();
            if (g.contains("paths")) cfg.grid.paths = g.at("paths").get<std::size_t>();
            if (g.contains("seed")) cfg.grid.seed = g.at("seed").get<std::uint64_t>();
        }
        if (j.contains("solver")) {
            const ordered_json& s = j.at("solver");
            if (s.contains("basis_degree"))
                cfg.solver.regression.basis_degree = s.at("basis_degree").get<int>();
            if (s.contains("ridge"))
                cfg.solver.regression.ridge = as_number(s.at("ridge"), "solver.ridge");
            if (s.contains("min_paths_per_fit"))
                cfg.solver.regression.min_paths_per_fit =
                    s.at("min_paths_per_fit").get<std::size_t>();
            if (s.contains("ladder_levels")) {
                for (const auto& v : s.at("ladder_levels"))
                    cfg.solver.ladder_levels.push_back(
                        as_number(v, "solver.ladder_levels[]"));
            }
            if (s.contains("ladder_mode")) {
                const std::string mode = s.at("ladder_mode").get<std::string>();
                if (mode == "compact")
                    cfg.solver.ladder_mode = LadderMode::CompactTruncation;
                else if (mode == "constraint")
                    cfg.solver.ladder_mode = LadderMode::ConstraintTruncation;
                else
                    fail("solver.ladder_mode", "expected 'compact' or 'constraint'");
            }
        }
        if (j.contains("oracle")) {
            const ordered_json& o = j.at("oracle");
            if (o.contains("depth")) cfg.oracle.depth = o.at("depth").get<std::size_t>();
            if (o.contains("action_grid"))
                cfg.oracle.action_grid = o.at("action_grid").get<std::size_t>();
        }
        if (j.contains("x_grid")) {
            for (const auto& v : j.at("x_grid"))
                cfg.x_grid.push_back(as_number(v, "x_grid[]"));
        }
        if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string config_to_json(const RunConfig& config) {
    return config_to_json_object(config).dump(2);
}

int run_with_config(const std::string& subcommand, RunConfig cfg) {
    cfg.validate();

    const fs::path out_dir(cfg.output_dir);
    DirLock lock(out_dir);

    Artifacts art;
    if (subcommand == "simulate")
        art = run_simulate(cfg);
    else if (subcommand == "solve")
        art = run_solve(cfg);
    else if (subcommand == "ladder")
        art = run_ladder(cfg);
    else if (subcommand == "oracle")
        art = run_oracle(cfg);
    else if (subcommand == "verify")
        art = run_verify(cfg);
    else if (subcommand == "value")
        art = run_value(cfg);
    else
        throw ConfigError("unknown subcommand '" + subcommand + "'");

    ordered_json summary;
    summary["subcommand"] = subcommand;
    summary["config"] = config_to_json_object(cfg);
    for (auto& [key, value] : art.summary.items()) summary[key] = value;

    std::string report = "jumpbsde " + subcommand + " (seed " +
                         std::to_string(cfg.grid.seed) + ", paths " +
                         std::to_string(cfg.grid.paths) + ", steps " +
                         std::to_string(cfg.grid.steps) + ")\n";
    for (const std::string& line : art.report_lines) report += line + "\n";
    report += art.exit_code == 0 ? "status: ok\n" : "status: diagnostic failure\n";

    write_file(out_dir / "summary.json", summary.dump(2) + "\n");
    write_file(out_dir / "series.csv", art.series_csv);
    write_file(out_dir / "report.txt", report);
    return art.exit_code;
}

int run(const std::string& subcommand, const std::string& config_path,
        const CliOverrides& overrides) {
    RunConfig cfg = load_config(config_path);
    if (overrides.out) cfg.output_dir = *overrides.out;
    if (overrides.seed) cfg.grid.seed = *overrides.seed;
    if (overrides.paths) cfg.grid.paths = *overrides.paths;
    if (overrides.steps) cfg.grid.steps = *overrides.steps;
    return run_with_config(subcommand, cfg);
}

}  // namespace jumpbsde
