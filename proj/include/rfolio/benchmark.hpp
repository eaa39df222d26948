#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rfolio {

struct BenchmarkCheck {
    std::string name;
    double computed = 0.0;
    double reference = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string details;
    double runtime_ms = 0.0; ///< console/summary only; kept out of the JSON report
};

struct BenchmarkReport {
    std::uint64_t seed = 0;
    std::vector<BenchmarkCheck> checks;
    bool all_pass = false;
};

/// Run the full acceptance suite: the closed-form/oracle checks plus a second
/// pass that verifies byte-identical reproducibility of the report itself.
BenchmarkReport run_benchmark(std::uint64_t seed);

/// Deterministic serialization written to benchmark_report.json (runtimes are
/// excluded so reruns with the same seed produce identical bytes).
std::string benchmark_report_json(const BenchmarkReport& report);

/// One fixed-width console line per check.
std::string benchmark_report_text(const BenchmarkReport& report);

} // namespace rfolio
