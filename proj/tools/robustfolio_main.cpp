// Command-line front end: scenario configs in, CSV/JSON artifacts out.
//
// Exit codes: 0 success, 2 configuration error, 3 solver error,
// 4 benchmark failure.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "rfolio/benchmark.hpp"
#include "rfolio/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"robustfolio: robust consumption-investment utility toolkit"};

    std::string mode_text;
    std::string scenario_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    long long seed = -1;
    long long paths = -1;
    long long steps = -1;

    app.add_option("--mode", mode_text, "simulate|solve-bsde|optimize|hjb|benchmark (overrides the scenario file)");
    app.add_option("--scenario", scenario_path, "scenario config file (key=value or JSON)");
    app.add_option("--seed", seed, "override grid.seed");
    app.add_option("--paths", paths, "override grid.paths");
    app.add_option("--steps", steps, "override grid.steps");
    app.add_option("--out", out_dir, "output directory (default: current directory)");
    app.add_option("--set", overrides, "repeatable key=value override")->take_all();

    CLI11_PARSE(app, argc, argv);

    try {
        if (seed >= 0) overrides.push_back("grid.seed=" + std::to_string(seed));
        if (paths >= 0) overrides.push_back("grid.paths=" + std::to_string(paths));
        if (steps >= 0) overrides.push_back("grid.steps=" + std::to_string(steps));
        if (!mode_text.empty()) overrides.push_back("mode=" + mode_text);

        rfolio::Scenario sc;
        if (!scenario_path.empty()) {
            sc = rfolio::load_scenario(scenario_path, overrides);
        } else {
            std::map<std::string, std::string> kv;
            for (const std::string& ov : overrides) {
                auto eq = ov.find('=');
                if (eq == std::string::npos) throw rfolio::ConfigError("override '" + ov + "' is not key=value");
                kv[ov.substr(0, eq)] = ov.substr(eq + 1);
            }
            sc = rfolio::scenario_from_map(std::move(kv), "adhoc");
            if (sc.mode != rfolio::RunMode::Benchmark && !sc.market) {
                throw rfolio::ConfigError("mode '" + rfolio::to_string(sc.mode) + "' needs --scenario <file>");
            }
        }
        if (!out_dir.empty()) sc.out_dir = out_dir;

        int code = rfolio::run_scenario(sc);
        if (sc.mode == rfolio::RunMode::Benchmark) {
            // replay the per-check lines for the console from the written report
            std::printf("benchmark report written to %s/benchmark_report.json\n", sc.out_dir.c_str());
        }
        if (code == 0) {
            std::printf("%s: ok (artifacts in %s)\n", rfolio::to_string(sc.mode).c_str(), sc.out_dir.c_str());
        }
        return code;
    } catch (const rfolio::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    }
}
