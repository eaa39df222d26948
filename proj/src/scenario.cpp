#include "rfolio/scenario.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rfolio/benchmark.hpp"
#include "rfolio/closed_forms.hpp"

namespace rfolio {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::Simulate: return "simulate";
        case RunMode::SolveBsde: return "solve-bsde";
        case RunMode::Optimize: return "optimize";
        case RunMode::Hjb: return "hjb";
        case RunMode::Benchmark: return "benchmark";
    }
    return "?";
}

RunMode parse_mode(const std::string& text) {
    if (text == "simulate") return RunMode::Simulate;
    if (text == "solve-bsde") return RunMode::SolveBsde;
    if (text == "optimize") return RunMode::Optimize;
    if (text == "hjb") return RunMode::Hjb;
    if (text == "benchmark") return RunMode::Benchmark;
    throw ConfigError("unknown mode '" + text + "' (expected simulate|solve-bsde|optimize|hjb|benchmark)");
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "scenario.name", "mode",
        "market.b", "market.sigma", "market.delta", "market.beta", "market.alpha", "market.alpha_bar", "market.T",
        "constraint.kind", "constraint.lower", "constraint.upper", "constraint.vertices",
        "grid.steps", "grid.paths", "grid.seed",
        "reward.U", "reward.Ubar", "reward.power_exponent", "reward.consumption", "reward.xi",
        "bsde.basis_degree", "bsde.tol_picard", "bsde.max_iters", "bsde.ridge",
        "dual.x0", "dual.kernel_grid", "dual.tol_budget", "dual.tol_fp", "dual.damping", "dual.max_outer",
        "dual.gammas",
        "hjb.z_min", "hjb.z_max", "hjb.nz", "hjb.nt", "hjb.a_lo", "hjb.a_hi", "hjb.control_points",
        "output.bsde_paths",
    };
    return keys;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
    std::string t = trim(text);
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        double v = std::stod(t, &used);
        if (used != t.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse number from '" + text + "'");
    }
}

long parse_long(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        long v = std::stol(trim(text), &used);
        if (used != trim(text).size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse integer from '" + text + "'");
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

VectorXd parse_vector(const std::string& key, const std::string& text) {
    std::vector<std::string> parts = split(text, ',');
    VectorXd v(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) v(static_cast<Eigen::Index>(i)) = parse_double(key, parts[i]);
    return v;
}

// "diag:0.2,0.3" or semicolon-separated rows "0.2,0;0,0.3".
MatrixXd parse_matrix(const std::string& key, const std::string& text) {
    std::string t = trim(text);
    if (t.rfind("diag:", 0) == 0) {
        VectorXd d = parse_vector(key, t.substr(5));
        MatrixXd m = MatrixXd::Zero(d.size(), d.size());
        m.diagonal() = d;
        return m;
    }
    std::vector<std::string> rows = split(t, ';');
    MatrixXd m;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        VectorXd row = parse_vector(key, rows[r]);
        if (r == 0) m = MatrixXd(static_cast<Eigen::Index>(rows.size()), row.size());
        if (row.size() != m.cols()) throw ConfigError("key '" + key + "': ragged matrix rows");
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

bool looks_piecewise(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos) return false;
    // "diag:" is a matrix prefix, not a time segment
    return text.rfind("diag:", 0) != 0;
}

// "0:0.1;0.5:0" -> scalar segments; a plain number is one segment from t=0.
PiecewiseConstant<double> parse_piecewise_scalar(const std::string& key, const std::string& text) {
    if (!looks_piecewise(text)) return PiecewiseConstant<double>(parse_double(key, text));
    std::vector<double> times, values;
    for (const std::string& seg : split(text, ';')) {
        auto colon = seg.find(':');
        if (colon == std::string::npos) throw ConfigError("key '" + key + "': expected t:value segments");
        times.push_back(parse_double(key, seg.substr(0, colon)));
        values.push_back(parse_double(key, seg.substr(colon + 1)));
    }
    return PiecewiseConstant<double>(times, values);
}

PiecewiseConstant<VectorXd> parse_piecewise_vector(const std::string& key, const std::string& text) {
    if (!looks_piecewise(text)) return PiecewiseConstant<VectorXd>(parse_vector(key, text));
    std::vector<double> times;
    std::vector<VectorXd> values;
    for (const std::string& seg : split(text, ';')) {
        auto colon = seg.find(':');
        if (colon == std::string::npos) throw ConfigError("key '" + key + "': expected t:v1,v2 segments");
        times.push_back(parse_double(key, seg.substr(0, colon)));
        values.push_back(parse_vector(key, seg.substr(colon + 1)));
    }
    return PiecewiseConstant<VectorXd>(times, values);
}

std::string require(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("missing required key '" + key + "' for this mode");
    return it->second;
}

std::string get_or(const std::map<std::string, std::string>& kv, const std::string& key, const std::string& dflt) {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
}

void flatten_json(const json& node, const std::string& prefix, std::map<std::string, std::string>& out) {
    if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it) {
            flatten_json(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
        }
        return;
    }
    auto scalar = [](const json& v) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        return v.dump();
    };
    if (node.is_array()) {
        std::ostringstream os;
        for (std::size_t i = 0; i < node.size(); ++i) {
            if (i) os << (node[i].is_array() || node[0].is_array() ? ";" : ",");
            if (node[i].is_array()) {
                for (std::size_t j = 0; j < node[i].size(); ++j) {
                    if (j) os << ",";
                    os << scalar(node[i][j]);
                }
            } else {
                os << scalar(node[i]);
            }
        }
        out[prefix] = os.str();
        return;
    }
    out[prefix] = scalar(node);
}

Utility parse_utility(const std::string& key, const std::string& text, double power_exponent) {
    if (text == "log") return Utility::log_utility();
    if (text == "power") return Utility::power(power_exponent);
    throw ConfigError("key '" + key + "': unknown utility '" + text + "' (expected log|power)");
}

ConsumptionSpec parse_consumption(const std::string& text) {
    if (text == "zero") return ConsumptionSpec::zero();
    if (text.rfind("constant:", 0) == 0) return ConsumptionSpec::constant_rate(parse_double("reward.consumption", text.substr(9)));
    throw ConfigError("key 'reward.consumption': expected zero|constant:<rate>, got '" + text + "'");
}

TerminalSpec parse_terminal(const std::string& text) {
    if (text.rfind("constant:", 0) == 0) return TerminalSpec::constant(parse_double("reward.xi", text.substr(9)));
    if (text.rfind("price:", 0) == 0) return TerminalSpec::asset_price(static_cast<int>(parse_long("reward.xi", text.substr(6))));
    if (text.rfind("exp_gaussian:", 0) == 0) {
        VectorXd ms = parse_vector("reward.xi", text.substr(13));
        if (ms.size() != 2) throw ConfigError("key 'reward.xi': exp_gaussian expects two parameters m,s");
        return TerminalSpec::exp_gaussian(ms(0), ms(1));
    }
    throw ConfigError("key 'reward.xi': expected constant:<k>|price:<i>|exp_gaussian:<m>,<s>, got '" + text + "'");
}

ConstraintSet parse_constraint(const std::map<std::string, std::string>& kv, int dim) {
    std::string kind = get_or(kv, "constraint.kind", "full_space");
    if (kind == "full_space") return ConstraintSet::full_space(dim);
    if (kind == "nonneg_cone") return ConstraintSet::nonneg_orthant_cone(dim);
    if (kind == "box") {
        VectorXd lower = parse_vector("constraint.lower", require(kv, "constraint.lower"));
        VectorXd upper = parse_vector("constraint.upper", require(kv, "constraint.upper"));
        if (lower.size() != dim) throw ConfigError("key 'constraint.lower': dimension mismatch with market");
        return ConstraintSet::box(lower, upper);
    }
    if (kind == "polytope") {
        std::vector<std::string> rows = split(require(kv, "constraint.vertices"), ';');
        MatrixXd V(dim, static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            VectorXd vert = parse_vector("constraint.vertices", rows[i]);
            if (vert.size() != dim) throw ConfigError("key 'constraint.vertices': vertex dimension mismatch");
            V.col(static_cast<Eigen::Index>(i)) = vert;
        }
        return ConstraintSet::polytope_hull(V);
    }
    throw ConfigError("key 'constraint.kind': unknown kind '" + kind + "'");
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw SolverError("cannot open output file " + path.string());
    os << content;
}

std::string csv_preamble(const Scenario& sc) {
    std::ostringstream os;
    for (const auto& [k, v] : sc.resolved) os << "# " << k << " = " << v << "\n";
    return os.str();
}

json config_json(const Scenario& sc) {
    json j = json::object();
    for (const auto& [k, v] : sc.resolved) j[k] = v;
    return j;
}

struct ModeOutputs {
    json results;
    int exit_code = 0;
};

ModeOutputs run_simulate(const Scenario& sc) {
    const MarketParams& params = *sc.market;
    PathGrid g = simulate_paths(params, sc.grid.steps, sc.grid.paths, sc.grid.seed);

    KernelProcess nu = sc.dual.kernel_grid.empty() ? KernelProcess::zero(params.dim())
                                                   : KernelProcess::constant(sc.dual.kernel_grid.front());
    ConstraintSet K = sc.constraint ? *sc.constraint : ConstraintSet::full_space(params.dim());
    MatrixXd Z = girsanov_density(g, params, nu);
    MatrixXd A = upper_variation(K, nu, g);
    MatrixXd c = sc.reward.consumption.evaluate(g);
    WealthResult wealth = wealth_path(g, {}, c, sc.dual.x0);

    std::ostringstream csv;
    csv << csv_preamble(sc) << "path,t";
    for (int i = 0; i < params.dim(); ++i) csv << ",S_" << (i + 1);
    csv << ",Z_nu,A_nu,X\n";
    for (Eigen::Index m = 0; m < g.paths; ++m) {
        for (int n = 0; n <= g.steps; ++n) {
            csv << m << "," << format_g17(g.time_at(n));
            for (int i = 0; i < params.dim(); ++i) csv << "," << format_g17(g.S[n](m, i));
            csv << "," << format_g17(Z(m, n)) << "," << format_g17(A(m, n)) << "," << format_g17(wealth.X(m, n))
                << "\n";
        }
    }
    write_text_file(fs::path(sc.out_dir) / "paths.csv", csv.str());

    ModeOutputs out;
    out.results["paths"] = static_cast<long>(g.paths);
    out.results["steps"] = g.steps;
    out.results["kernel"] = nu.describe();
    out.results["terminal_price_mean"] = pairwise_mean(g.S.back().col(0));
    auto [m_eta, m_bar] = kernel_moment_diagnostics(Z, 2.0, 2.0);
    out.results["kernel_moment"] = {{"eta", m_eta.eta}, {"value", m_eta.moment}, {"finite", m_eta.finite}};
    out.results["kernel_moment_bar"] = {{"eta", m_bar.eta}, {"value", m_bar.moment}, {"finite", m_bar.finite}};
    return out;
}

ModeOutputs run_solve_bsde(const Scenario& sc) {
    const MarketParams& params = *sc.market;
    PathGrid g = simulate_paths(params, sc.grid.steps, sc.grid.paths, sc.grid.seed);
    BsdeSolution sol = solve_entropic_bsde(g, sc.reward, params, sc.bsde);
    MatrixXd Zstar = worst_case_density(sol, params, g);

    std::ostringstream csv;
    csv << csv_preamble(sc) << "path,t,Y";
    for (int i = 0; i < params.dim(); ++i) csv << ",Z_" << (i + 1);
    csv << ",Zstar\n";
    Eigen::Index rows = std::min<Eigen::Index>(g.paths, sc.bsde_csv_paths);
    for (Eigen::Index m = 0; m < rows; ++m) {
        for (int n = 0; n <= g.steps; ++n) {
            csv << m << "," << format_g17(g.time_at(n)) << "," << format_g17(sol.Y(m, n));
            for (int i = 0; i < params.dim(); ++i) {
                csv << "," << format_g17(n < g.steps ? sol.Z[n](m, i) : 0.0);
            }
            csv << "," << format_g17(Zstar(m, n)) << "\n";
        }
    }
    write_text_file(fs::path(sc.out_dir) / "bsde.csv", csv.str());

    ModeOutputs out;
    out.results["Y0"] = sol.y0;
    out.results["SE"] = sol.y0_se;
    out.results["picard_iters"] = sol.picard_iters;
    out.results["residual"] = sol.residual;
    out.results["Zstar_T_mean"] = pairwise_mean(Zstar.col(g.steps));
    return out;
}

ModeOutputs run_optimize(const Scenario& sc) {
    const MarketParams& params = *sc.market;
    PathGrid g = simulate_paths(params, sc.grid.steps, sc.grid.paths, sc.grid.seed);
    ConstraintSet K = sc.constraint ? *sc.constraint : ConstraintSet::full_space(params.dim());

    std::vector<KernelProcess> family;
    family.push_back(KernelProcess::zero(params.dim()));
    for (const VectorXd& v : sc.dual.kernel_grid) family.push_back(KernelProcess::constant(v));

    RobustSolution sol = solve_robust_problem(sc.dual.x0, g, params, K, sc.reward, family, sc.dual.config, sc.bsde);

    json res;
    res["Y0"] = sol.Y0;
    res["Y0_se"] = sol.Y0_se;
    res["lambda"] = sol.dual.lambda;
    res["kernel"] = family[static_cast<std::size_t>(sol.dual.kernel_index)].describe();
    res["budget_gap"] = sol.dual.budget_gap;
    res["outer_iters"] = sol.outer_iters;
    res["pre_projection_violation"] = sol.pre_projection_violation;
    res["y0_trace"] = sol.y0_trace;
    res["xi_mean"] = pairwise_mean(sol.xi_star);
    json theta0 = json::array();
    for (int i = 0; i < params.dim(); ++i) {
        theta0.push_back(pairwise_mean(sol.H_star[0].col(i).cwiseQuotient(g.S[0].col(i))));
    }
    res["theta0"] = theta0;

    // Shares comparison against the published two-asset incomplete-market
    // closed form whenever the scenario matches its shape.
    try {
        Example1ClosedForm cf = example1_closed_form(g, params, sc.dual.x0);
        res["example1_reference"] = {{"theta_beta_0", cf.theta_beta(0, 0)}, {"theta_inf_0", cf.theta_inf(0, 0)}};
    } catch (const std::invalid_argument&) {
        // different market shape; no reference emitted
    }

    json adm = json::array();
    for (const AdmissibilityEntry& e : admissibility_check(sol.c_star, sol.xi_star, sc.dual.gammas, sc.reward, g)) {
        adm.push_back({{"gamma", e.gamma},
                       {"terminal_moment", std::isfinite(e.terminal_moment) ? json(e.terminal_moment) : json("inf")},
                       {"running_moment", std::isfinite(e.running_moment) ? json(e.running_moment) : json("inf")},
                       {"flagged", e.flagged}});
    }
    res["admissibility"] = adm;

    json solution = res;
    solution["config"] = config_json(sc);
    solution["seed"] = sc.grid.seed;
    write_text_file(fs::path(sc.out_dir) / "solution.json", solution.dump(2) + "\n");

    std::ostringstream csv;
    csv << csv_preamble(sc) << "t,mean_c";
    for (int i = 0; i < params.dim(); ++i) csv << ",mean_H_" << (i + 1);
    csv << ",mean_X\n";
    for (int n = 0; n <= g.steps; ++n) {
        double mc = (sol.c_star.size() > 0 && n < g.steps) ? pairwise_mean(sol.c_star.col(n)) : 0.0;
        csv << format_g17(g.time_at(n)) << "," << format_g17(mc);
        for (int i = 0; i < params.dim(); ++i) {
            csv << "," << format_g17(n < g.steps ? pairwise_mean(sol.H_star[n].col(i)) : 0.0);
        }
        csv << "," << format_g17(pairwise_mean(sol.X_star.col(n))) << "\n";
    }
    write_text_file(fs::path(sc.out_dir) / "solution.csv", csv.str());

    ModeOutputs out;
    out.results = res;
    return out;
}

ModeOutputs run_hjb(const Scenario& sc) {
    const MarketParams& params = *sc.market;
    if (params.dim() != 1) throw ConfigError("hjb mode requires a one-dimensional market block");
    HjbProblem prob;
    prob.b = params.drift_at(0.0)(0);
    prob.sigma = params.sigma()(0, 0);
    prob.beta = params.beta();
    prob.a_lo = sc.hjb.a_lo;
    prob.a_hi = sc.hjb.a_hi;
    HjbGrid grid = HjbGrid::log_spaced(sc.hjb.z_min, sc.hjb.z_max, sc.hjb.nz, sc.hjb.nt, params.horizon());
    HjbOptions opts;
    opts.control_points = sc.hjb.control_points;
    DualValueSurface surf = solve_hjb(grid, prob, opts);

    std::ostringstream csv;
    csv << csv_preamble(sc) << "t,z,v,a_star\n";
    for (int n = 0; n <= grid.nt; ++n) {
        for (Eigen::Index j = 0; j < grid.z.size(); ++j) {
            csv << format_g17(surf.t(n)) << "," << format_g17(surf.z(j)) << "," << format_g17(surf.v(n, j)) << ","
                << format_g17(surf.a_star(n, j)) << "\n";
        }
    }
    write_text_file(fs::path(sc.out_dir) / "hjb_surface.csv", csv.str());

    ModeOutputs out;
    out.results["v0_at_mid"] = surf.v(0, grid.z.size() / 2);
    out.results["z_mid"] = surf.z(grid.z.size() / 2);
    out.results["non_convex_slices"] = surf.non_convex_slices;
    return out;
}

ModeOutputs run_benchmark_mode(const Scenario& sc) {
    BenchmarkReport report = run_benchmark(sc.grid.seed);
    write_text_file(fs::path(sc.out_dir) / "benchmark_report.json", benchmark_report_json(report));
    std::fputs(benchmark_report_text(report).c_str(), stdout);

    ModeOutputs out;
    json checks = json::array();
    for (const BenchmarkCheck& c : report.checks) {
        checks.push_back({{"name", c.name}, {"pass", c.pass}, {"runtime_ms", c.runtime_ms}});
    }
    out.results["checks"] = checks;
    out.results["all_pass"] = report.all_pass;
    out.exit_code = report.all_pass ? 0 : 4;
    return out;
}

} // namespace

Scenario scenario_from_map(std::map<std::string, std::string> kv, const std::string& fallback_name) {
    for (const auto& [k, v] : kv) {
        (void)v;
        if (!known_keys().count(k)) throw ConfigError("unknown key '" + k + "'");
    }

    Scenario sc;
    sc.resolved = kv;
    sc.name = get_or(kv, "scenario.name", fallback_name);
    sc.mode = parse_mode(get_or(kv, "mode", "simulate"));

    if (kv.count("market.b") || kv.count("market.sigma")) {
        PiecewiseConstant<VectorXd> b = parse_piecewise_vector("market.b", require(kv, "market.b"));
        MatrixXd sigma = parse_matrix("market.sigma", require(kv, "market.sigma"));
        int dim = static_cast<int>(sigma.rows());
        PiecewiseConstant<double> delta = parse_piecewise_scalar("market.delta", get_or(kv, "market.delta", "0"));
        double beta = parse_double("market.beta", get_or(kv, "market.beta", "1"));
        double alpha = parse_double("market.alpha", get_or(kv, "market.alpha", "0"));
        double alpha_bar = parse_double("market.alpha_bar", get_or(kv, "market.alpha_bar", "1"));
        double T = parse_double("market.T", require(kv, "market.T"));
        try {
            sc.market.emplace(dim, std::move(b), std::move(sigma), std::move(delta), beta, alpha, alpha_bar, T);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("market block: ") + e.what());
        }
    }

    if (kv.count("constraint.kind")) {
        if (!sc.market) throw ConfigError("constraint block requires a market block (for the dimension)");
        try {
            sc.constraint.emplace(parse_constraint(kv, sc.market->dim()));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("constraint block: ") + e.what());
        }
    }

    sc.grid.steps = static_cast<int>(parse_long("grid.steps", get_or(kv, "grid.steps", "50")));
    sc.grid.paths = parse_long("grid.paths", get_or(kv, "grid.paths", "10000"));
    sc.grid.seed = static_cast<std::uint64_t>(parse_long("grid.seed", get_or(kv, "grid.seed", "1")));

    double power_exponent = parse_double("reward.power_exponent", get_or(kv, "reward.power_exponent", "0.5"));
    sc.reward.U = parse_utility("reward.U", get_or(kv, "reward.U", "log"), power_exponent);
    sc.reward.Ubar = parse_utility("reward.Ubar", get_or(kv, "reward.Ubar", "log"), power_exponent);
    sc.reward.consumption = parse_consumption(get_or(kv, "reward.consumption", "zero"));
    if (kv.count("reward.xi")) sc.reward.terminal = parse_terminal(kv.at("reward.xi"));

    sc.bsde.basis_degree = static_cast<int>(parse_long("bsde.basis_degree", get_or(kv, "bsde.basis_degree", "3")));
    sc.bsde.tol_picard = parse_double("bsde.tol_picard", get_or(kv, "bsde.tol_picard", "1e-6"));
    sc.bsde.max_iters = static_cast<int>(parse_long("bsde.max_iters", get_or(kv, "bsde.max_iters", "50")));
    sc.bsde.ridge = parse_double("bsde.ridge", get_or(kv, "bsde.ridge", "1e-8"));

    sc.dual.x0 = parse_double("dual.x0", get_or(kv, "dual.x0", "1"));
    if (kv.count("dual.kernel_grid")) {
        for (const std::string& item : split(kv.at("dual.kernel_grid"), ';')) {
            if (!item.empty()) sc.dual.kernel_grid.push_back(parse_vector("dual.kernel_grid", item));
        }
    }
    sc.dual.config.tol_budget = parse_double("dual.tol_budget", get_or(kv, "dual.tol_budget", "1e-3"));
    sc.dual.config.tol_fp = parse_double("dual.tol_fp", get_or(kv, "dual.tol_fp", "1e-3"));
    sc.dual.config.damping = parse_double("dual.damping", get_or(kv, "dual.damping", "0.5"));
    sc.dual.config.max_outer = static_cast<int>(parse_long("dual.max_outer", get_or(kv, "dual.max_outer", "30")));
    if (kv.count("dual.gammas")) {
        sc.dual.gammas.clear();
        for (const std::string& item : split(kv.at("dual.gammas"), ',')) {
            sc.dual.gammas.push_back(parse_double("dual.gammas", item));
        }
    }

    sc.hjb.z_min = parse_double("hjb.z_min", get_or(kv, "hjb.z_min", "0.05"));
    sc.hjb.z_max = parse_double("hjb.z_max", get_or(kv, "hjb.z_max", "20"));
    sc.hjb.nz = static_cast<int>(parse_long("hjb.nz", get_or(kv, "hjb.nz", "201")));
    sc.hjb.nt = static_cast<int>(parse_long("hjb.nt", get_or(kv, "hjb.nt", "200")));
    sc.hjb.a_lo = parse_double("hjb.a_lo", get_or(kv, "hjb.a_lo", "0"));
    sc.hjb.a_hi = parse_double("hjb.a_hi", get_or(kv, "hjb.a_hi", "0"));
    sc.hjb.control_points = static_cast<int>(parse_long("hjb.control_points", get_or(kv, "hjb.control_points", "41")));

    sc.bsde_csv_paths = static_cast<int>(parse_long("output.bsde_paths", get_or(kv, "output.bsde_paths", "200")));

    // Mode-specific block requirements.
    switch (sc.mode) {
        case RunMode::Simulate:
        case RunMode::SolveBsde:
        case RunMode::Optimize:
            if (!sc.market) throw ConfigError("mode '" + to_string(sc.mode) + "' requires the market block");
            if (sc.mode == RunMode::SolveBsde && !kv.count("reward.xi")) {
                throw ConfigError("mode 'solve-bsde' requires reward.xi");
            }
            break;
        case RunMode::Hjb:
            if (!sc.market) throw ConfigError("mode 'hjb' requires the market block");
            break;
        case RunMode::Benchmark:
            break;
    }
    return sc;
}

Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read scenario file '" + path + "'");
    std::stringstream buffer;
    buffer << is.rdbuf();
    std::string content = buffer.str();

    std::map<std::string, std::string> kv;
    std::string trimmed = trim(content);
    bool is_json = fs::path(path).extension() == ".json" || (!trimmed.empty() && trimmed.front() == '{');
    if (is_json) {
        json j;
        try {
            j = json::parse(content);
        } catch (const json::parse_error& e) {
            throw ConfigError("scenario JSON parse error in '" + path + "': " + e.what());
        }
        flatten_json(j, "", kv);
    } else {
        std::istringstream lines(content);
        std::string line;
        int lineno = 0;
        while (std::getline(lines, line)) {
            ++lineno;
            std::string t = trim(line);
            if (t.empty() || t.front() == '#') continue;
            auto eq = t.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("scenario file '" + path + "' line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
            }
            std::string key = trim(t.substr(0, eq));
            if (!known_keys().count(key)) {
                throw ConfigError("scenario file '" + path + "' line " + std::to_string(lineno) +
                                  ": unknown key '" + key + "'");
            }
            kv[key] = trim(t.substr(eq + 1));
        }
    }

    for (const std::string& ov : overrides) {
        auto eq = ov.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + ov + "' is not of the form key=value");
        kv[trim(ov.substr(0, eq))] = trim(ov.substr(eq + 1));
    }

    return scenario_from_map(std::move(kv), fs::path(path).stem().string());
}

int run_scenario(const Scenario& sc) {
    fs::create_directories(sc.out_dir);
    auto start = std::chrono::steady_clock::now();

    ModeOutputs out;
    switch (sc.mode) {
        case RunMode::Simulate: out = run_simulate(sc); break;
        case RunMode::SolveBsde: out = run_solve_bsde(sc); break;
        case RunMode::Optimize: out = run_optimize(sc); break;
        case RunMode::Hjb: out = run_hjb(sc); break;
        case RunMode::Benchmark: out = run_benchmark_mode(sc); break;
    }

    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    json summary;
    summary["scenario"] = sc.name;
    summary["mode"] = to_string(sc.mode);
    summary["seed"] = sc.grid.seed;
    summary["config"] = config_json(sc);
    summary["results"] = out.results;
    summary["runtime_ms"] = ms;
    write_text_file(fs::path(sc.out_dir) / "summary.json", summary.dump(2) + "\n");
    return out.exit_code;
}

} // namespace rfolio
