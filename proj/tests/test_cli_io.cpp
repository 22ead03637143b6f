#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "jumpbsde/cli_io.hpp"

using namespace jumpbsde;
namespace fs = std::filesystem;

namespace {

std::string merton_config_text(const std::string& out_dir) {
    return std::string(R"({
  "market": {
    "b": 0.4, "sigma": 1.0, "alpha": 2.0, "T": 1.0, "s0": 1.0,
    "claim": {"type": "constant", "value": 0.0},
    "constraint": {"kind": "interval", "lo": -5.0, "hi": 5.0}
  },
  "x0": 0.0,
  "grid": {"steps": 10, "paths": 3000, "seed": 7},
  "solver": {"basis_degree": 3, "ridge": 1e-8},
  "oracle": {"depth": 3, "action_grid": 41},
  "x_grid": [0.0, 1.0],
  "output_dir": ")") +
           out_dir + "\"\n}";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("jumpbsde_test_" + tag);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("config parsing and validation") {
    const RunConfig cfg = parse_config_text(merton_config_text("/tmp/x"));
    CHECK(cfg.grid.steps == 10);
    CHECK(cfg.grid.paths == 3000);
    CHECK(cfg.market.alpha == 2.0);
    CHECK(cfg.market.constraint.compact());
    CHECK(cfg.x_grid.size() == 2);

    SUBCASE("missing market fails with a field path") {
        CHECK_THROWS_WITH_AS(parse_config_text("{}"),
                             doctest::Contains("config.market"), ConfigError);
    }
    SUBCASE("beta at -1 names the invariant") {
        const std::string text = R"({
          "market": {
            "b": 0.1, "sigma": 1.0, "alpha": 1.0, "T": 1.0,
            "marks": [1.0], "intensities": [1.0], "beta": [-1.0],
            "claim": {"type": "constant", "value": 0.0},
            "constraint": {"kind": "interval", "lo": 0.0, "hi": 1.0}
          }
        })";
        CHECK_THROWS_WITH_AS(parse_config_text(text),
                             doctest::Contains("beta must be > -1"), ConfigError);
    }
    SUBCASE("per-step arrays must match the grid") {
        const std::string text = R"({
          "market": {
            "b": [0.1, 0.2, 0.3], "sigma": 1.0, "alpha": 1.0, "T": 1.0,
            "claim": {"type": "constant", "value": 0.0},
            "constraint": {"kind": "interval", "lo": 0.0, "hi": 1.0}
          },
          "grid": {"steps": 4, "paths": 100, "seed": 1}
        })";
        CHECK_THROWS_WITH_AS(parse_config_text(text),
                             doctest::Contains("grid.steps"), ConfigError);
    }
    SUBCASE("bad json is a config error") {
        CHECK_THROWS_AS(parse_config_text("{"), ConfigError);
    }
}

TEST_CASE("config echo omits the output directory") {
    const RunConfig cfg = parse_config_text(merton_config_text("/tmp/somewhere"));
    const std::string echo = config_to_json(cfg);
    CHECK(echo.find("somewhere") == std::string::npos);
    CHECK(echo.find("\"seed\": 7") != std::string::npos);
}

TEST_CASE("solve reruns are byte identical") {
    const fs::path dir_a = temp_dir("det_a");
    const fs::path dir_b = temp_dir("det_b");

    RunConfig cfg = parse_config_text(merton_config_text(dir_a.string()));
    CHECK(run_with_config("solve", cfg) == 0);
    cfg.output_dir = dir_b.string();
    CHECK(run_with_config("solve", cfg) == 0);

    CHECK(slurp(dir_a / "summary.json") == slurp(dir_b / "summary.json"));
    CHECK(slurp(dir_a / "series.csv") == slurp(dir_b / "series.csv"));

    const std::string csv = slurp(dir_a / "series.csv");
    CHECK(csv.rfind("t,mean_Y,min_Y,max_Y,mean_abs_Z,mean_norm_U,pi_mean,pi_min,pi_max",
                    0) == 0);
    // 10 steps -> header + 11 rows
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("different seeds give different artifacts") {
    const fs::path dir_a = temp_dir("seed_a");
    const fs::path dir_b = temp_dir("seed_b");
    RunConfig cfg = parse_config_text(merton_config_text(dir_a.string()));
    CHECK(run_with_config("solve", cfg) == 0);
    cfg.output_dir = dir_b.string();
    cfg.grid.seed = 8;
    CHECK(run_with_config("solve", cfg) == 0);
    CHECK(slurp(dir_a / "series.csv") != slurp(dir_b / "series.csv"));
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("verify passes on the Merton configuration") {
    const fs::path dir = temp_dir("verify");
    RunConfig cfg = parse_config_text(merton_config_text(dir.string()));
    cfg.grid.paths = 4000;
    CHECK(run_with_config("verify", cfg) == 0);
    const std::string report = slurp(dir / "report.txt");
    CHECK(report.find("[FAIL]") == std::string::npos);
    CHECK(report.find("h1_sweep") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("oracle artifacts carry the comparison") {
    const fs::path dir = temp_dir("oracle");
    const std::string text = R"({
      "market": {
        "b": 0.2, "sigma": 1.0, "alpha": 1.0, "T": 0.25, "s0": 1.0,
        "marks": [1.0], "intensities": [1.0], "beta": [0.2],
        "claim": {"type": "put", "strike": 1.0},
        "constraint": {"kind": "interval", "lo": 0.0, "hi": 1.0}
      },
      "grid": {"steps": 3, "paths": 20000, "seed": 11},
      "oracle": {"depth": 3, "action_grid": 81},
      "output_dir": ")" + dir.string() + "\"}";
    RunConfig cfg = parse_config_text(text);
    CHECK(run_with_config("oracle", cfg) == 0);
    const std::string summary = slurp(dir / "summary.json");
    CHECK(summary.find("dp_value") != std::string::npos);
    CHECK(summary.find("theorem_gap") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("per-step coefficient arrays run end to end") {
    const fs::path dir = temp_dir("stepfn");
    const std::string text = R"({
      "market": {
        "b": [0.1, 0.2, 0.3, 0.4], "sigma": [1.0, 1.1, 1.2, 1.3],
        "alpha": 1.0, "T": 1.0,
        "marks": [1.0], "intensities": [0.5], "beta": [[0.1, 0.2, 0.1, 0.2]],
        "claim": {"type": "constant", "value": 0.0},
        "constraint": {"kind": "interval", "lo": -1.0, "hi": 1.0}
      },
      "grid": {"steps": 4, "paths": 2000, "seed": 3},
      "oracle": {"depth": 4, "action_grid": 21},
      "output_dir": ")" + dir.string() + "\"}";
    RunConfig cfg = parse_config_text(text);
    CHECK(run_with_config("solve", cfg) == 0);
    CHECK(run_with_config("simulate", cfg) == 0);
    fs::remove_all(dir);
}

TEST_CASE("value emits a wealth table") {
    const fs::path dir = temp_dir("value");
    RunConfig cfg = parse_config_text(merton_config_text(dir.string()));
    CHECK(run_with_config("value", cfg) == 0);
    const std::string summary = slurp(dir / "summary.json");
    CHECK(summary.find("value_table") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("ladder subcommand runs the non-compact mode") {
    const fs::path dir = temp_dir("ladder");
    const std::string text = R"({
      "market": {
        "b": 0.8, "sigma": 1.0, "alpha": 0.2, "T": 0.5, "s0": 1.0,
        "claim": {"type": "put", "strike": 1.0},
        "constraint": {"kind": "half_line_up", "lo": 0.0}
      },
      "grid": {"steps": 10, "paths": 4000, "seed": 13},
      "solver": {"ladder_mode": "constraint", "ladder_levels": [1.0, 2.0, 6.0]},
      "output_dir": ")" + dir.string() + "\"}";
    RunConfig cfg = parse_config_text(text);
    CHECK(run_with_config("ladder", cfg) == 0);
    const std::string summary = slurp(dir / "summary.json");
    CHECK(summary.find("y0_mean") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("lockfile rejects concurrent runs") {
    const fs::path dir = temp_dir("lock");
    fs::create_directories(dir);
    std::ofstream(dir / ".jumpbsde.lock") << "held";
    RunConfig cfg = parse_config_text(merton_config_text(dir.string()));
    CHECK_THROWS_AS(run_with_config("solve", cfg), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("unknown subcommand and non-compact solve are config errors") {
    const fs::path dir = temp_dir("errors");
    RunConfig cfg = parse_config_text(merton_config_text(dir.string()));
    CHECK_THROWS_AS(run_with_config("frobnicate", cfg), ConfigError);

    cfg.market.constraint = ConstraintSet::half_line_up(0.0);
    CHECK_THROWS_AS(run_with_config("solve", cfg), ConfigError);
    fs::remove_all(dir);
}
