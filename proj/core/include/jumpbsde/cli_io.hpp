#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jumpbsde/bsde_solver.hpp"
#include "jumpbsde/levy_market.hpp"
#include "jumpbsde/regression.hpp"

namespace jumpbsde {

struct GridConfig {
    std::size_t steps = 50;
    std::size_t paths = 10000;
    std::uint64_t seed = 1;
};

struct SolverConfig {
    RegressionConfig regression;
    std::vector<double> ladder_levels;  // empty = pick defaults at run time
    LadderMode ladder_mode = LadderMode::CompactTruncation;
};

struct OracleConfig {
    std::size_t depth = 3;
    std::size_t action_grid = 81;
};

/// Fully resolved run configuration; every module-level precondition is
/// re-validated at load with a field-path message.
struct RunConfig {
    MarketSpec market;
    double x0 = 0.0;
    GridConfig grid;
    SolverConfig solver;
    OracleConfig oracle;
    std::vector<double> x_grid;  // wealth grid for the value table
    std::string output_dir = "out";

    void validate() const;
};

struct CliOverrides {
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<std::size_t> steps;
};

RunConfig parse_config_text(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// Resolved-config echo embedded in every summary (excludes the output
/// directory so reruns into different directories stay byte-identical).
std::string config_to_json(const RunConfig& config);

/// Known subcommands: simulate, solve, ladder, oracle, verify, value.
/// Writes summary.json, series.csv and report.txt under the output
/// directory. Returns 0 on success, 1 on diagnostic failure, 2 on
/// configuration errors.
int run(const std::string& subcommand, const std::string& config_path,
        const CliOverrides& overrides);

/// Same, with an already-loaded configuration (convenient for tests).
int run_with_config(const std::string& subcommand, RunConfig config);

}  // namespace jumpbsde
