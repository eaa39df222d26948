#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rfolio/bsde.hpp"
#include "rfolio/dual.hpp"
#include "rfolio/hjb.hpp"

namespace rfolio {

enum class RunMode { Simulate, SolveBsde, Optimize, Hjb, Benchmark };

std::string to_string(RunMode mode);
RunMode parse_mode(const std::string& text);

struct GridConfig {
    int steps = 50;
    Eigen::Index paths = 10000;
    std::uint64_t seed = 1;
};

struct DualSettings {
    double x0 = 1.0;
    std::vector<VectorXd> kernel_grid; ///< constant kernels added next to Zero
    DualConfig config;
    std::vector<double> gammas{1.0};   ///< admissibility diagnostics
};

struct HjbSettings {
    double z_min = 0.05;
    double z_max = 20.0;
    int nz = 201;
    int nt = 200;
    double a_lo = 0.0;
    double a_hi = 0.0;
    int control_points = 41;
};

/// A fully resolved scenario: the typed blocks plus the flat key-value map
/// they were parsed from (embedded into every output artifact).
struct Scenario {
    std::string name = "scenario";
    RunMode mode = RunMode::Simulate;
    std::map<std::string, std::string> resolved;

    std::optional<MarketParams> market;
    std::optional<ConstraintSet> constraint;
    GridConfig grid;
    RewardSpec reward;
    BsdeConfig bsde;
    DualSettings dual;
    HjbSettings hjb;
    int bsde_csv_paths = 200; ///< per-path rows written to bsde.csv
    std::string out_dir = ".";
};

/// Parse a scenario from a flat key=value file (# comments) or a JSON file
/// (nested objects flattened to dotted keys). Unknown keys are rejected with
/// the offending key and line. Overrides are key=value pairs applied on top.
Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides = {});

/// Build a scenario from an already-flattened key map (used by overrides-only
/// invocations and the tests).
Scenario scenario_from_map(std::map<std::string, std::string> kv, const std::string& fallback_name);

/// Execute the scenario's mode, writing its artifacts under out_dir. Returns
/// the process exit status (0 success, 4 benchmark failure); configuration
/// and solver failures surface as ConfigError / SolverError.
int run_scenario(const Scenario& sc);

/// Floating-point formatting used by every CSV artifact (17 significant digits).
std::string format_g17(double v);

} // namespace rfolio
