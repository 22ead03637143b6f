#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "jumpbsde/cli_io.hpp"
#include "jumpbsde/errors.hpp"

namespace {

void print_error_json(const std::string& kind, const std::string& message) {
    // keep it machine readable: one JSON object on stderr
    std::string escaped;
    for (char c : message) {
        if (c == '"' || c == '\\') escaped += '\\';
        if (c == '\n') {
            escaped += "\\n";
            continue;
        }
        escaped += c;
    }
    std::cerr << "{\"error\":{\"kind\":\"" << kind << "\",\"message\":\"" << escaped
              << "\"}}" << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exponential-utility portfolio optimization in jump markets via BSDEs"};
    app.require_subcommand(1);

    std::string config_path;
    jumpbsde::CliOverrides overrides;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    std::size_t steps = 0;

    const char* names[] = {"simulate", "solve", "ladder", "oracle", "verify", "value"};
    const char* descriptions[] = {
        "simulate paths and report moment summaries",
        "backward LSMC solve with diagnostics",
        "monotone approximation ladder",
        "scenario-tree dynamic programming oracle and cross-check",
        "full invariant suite",
        "value-function table over a wealth grid",
    };
    for (std::size_t k = 0; k < 6; ++k) {
        CLI::App* sub = app.add_subcommand(names[k], descriptions[k]);
        sub->add_option("--config", config_path, "JSON configuration file")->required();
        CLI::Option* o = sub->add_option("--out", out, "output directory (overrides config)");
        CLI::Option* s = sub->add_option("--seed", seed, "RNG seed (overrides config)");
        CLI::Option* p = sub->add_option("--paths", paths, "path count (overrides config)");
        CLI::Option* n = sub->add_option("--steps", steps, "time steps (overrides config)");
        sub->callback([&, o, s, p, n]() {
            if (o->count()) overrides.out = out;
            if (s->count()) overrides.seed = seed;
            if (p->count()) overrides.paths = paths;
            if (n->count()) overrides.steps = steps;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        return jumpbsde::run(sub, config_path, overrides);
    } catch (const jumpbsde::ConfigError& e) {
        print_error_json("config", e.what());
        return 2;
    } catch (const jumpbsde::NumericalError& e) {
        print_error_json("numerical", e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error_json("internal", e.what());
        return 1;
    }
}
