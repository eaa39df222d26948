#include "rfolio/benchmark.hpp"

#include <chrono>
#include <random>
#include <sstream>

#include <json.hpp>

#include "rfolio/closed_forms.hpp"
#include "rfolio/dual.hpp"
#include "rfolio/hjb.hpp"
#include "rfolio/scenario.hpp"

namespace rfolio {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kInf = std::numeric_limits<double>::infinity();

VectorXd vec1(double a) {
    VectorXd v(1);
    v << a;
    return v;
}

VectorXd vec2(double a, double b) {
    VectorXd v(2);
    v << a, b;
    return v;
}

double median_of(VectorXd v) {
    std::nth_element(v.data(), v.data() + v.size() / 2, v.data() + v.size());
    return v(v.size() / 2);
}

template <typename F>
BenchmarkCheck timed_check(const std::string& name, F&& body) {
    BenchmarkCheck check;
    check.name = name;
    auto t0 = Clock::now();
    body(check);
    check.runtime_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    return check;
}

// --- binomial lattice + exhaustive recursion oracle (delta > 0 criterion) ---

PathGrid binomial_grid(const MarketParams& params, int N) {
    const Eigen::Index M = Eigen::Index(1) << N;
    const double sqdt = std::sqrt(params.horizon() / N);
    std::vector<MatrixXd> dW(N, MatrixXd(M, 1));
    for (Eigen::Index m = 0; m < M; ++m) {
        for (int n = 0; n < N; ++n) {
            dW[n](m, 0) = ((m >> (N - 1 - n)) & 1) ? sqdt : -sqdt;
        }
    }
    return path_grid_from_increments(params, dW, params.horizon());
}

MatrixXd tree_recursion_oracle(const PathGrid& g, const MatrixXd& running, const VectorXd& terminal,
                               const MarketParams& params) {
    const Eigen::Index M = g.paths;
    const int N = g.steps;
    const double beta = params.beta();
    MatrixXd Y = MatrixXd::Zero(M, N + 1);
    Y.col(N) = terminal;
    for (int iter = 0; iter < 500; ++iter) {
        MatrixXd Ynew(M, N + 1);
        Ynew.col(N) = terminal;
        VectorXd exponent = -terminal / beta;
        for (int n = N - 1; n >= 0; --n) {
            VectorXd slice = params.delta_at(g.time_at(n)) * Y.col(n);
            if (running.size() > 0) slice -= running.col(n);
            exponent += (g.dt / beta) * slice;
            const Eigen::Index groups = Eigen::Index(1) << n;
            const Eigen::Index span = M / groups;
            for (Eigen::Index q = 0; q < groups; ++q) {
                double avg = 0.0;
                for (Eigen::Index m = q * span; m < (q + 1) * span; ++m) avg += std::exp(exponent(m));
                double y = -beta * std::log(avg / static_cast<double>(span));
                for (Eigen::Index m = q * span; m < (q + 1) * span; ++m) Ynew(m, n) = y;
            }
        }
        double change = (Ynew - Y).cwiseAbs().maxCoeff();
        Y = Ynew;
        if (change < 1e-13 && iter > 0) break;
    }
    return Y;
}

// Retained slice of an optimizer run, enough for the budget and
// self-consistency criteria without holding the full per-path state.
struct RetainedSolve {
    double Y0 = 0.0;
    double budget_gap = 0.0;
    VectorXd xi_star;
};

std::vector<BenchmarkCheck> run_checks(std::uint64_t seed) {
    std::vector<BenchmarkCheck> checks;

    // ---- criteria 1 and 3: lognormal entropic value and its worst-case density
    MarketParams gauss = MarketParams::constant(vec1(0.0), MatrixXd::Identity(1, 1), 0.0, 2.0, 0.0, 1.0, 1.0);
    RewardSpec gauss_spec;
    gauss_spec.terminal = TerminalSpec::exp_gaussian(0.0, 1.0);
    PathGrid gauss_grid = simulate_paths(gauss, 25, 100000, seed);
    MatrixXd gauss_Zstar;
    checks.push_back(timed_check("gaussian_terminal_value", [&](BenchmarkCheck& c) {
        BsdeSolution sol = solve_entropic_bsde(gauss_grid, gauss_spec, gauss);
        Y0Estimate direct = evaluate_Y0_direct(gauss_grid, gauss_spec, gauss);
        gauss_Zstar = worst_case_density(sol, gauss, gauss_grid);
        c.computed = sol.y0;
        c.reference = -0.25;
        c.tolerance = 3.0 * sol.y0_se;
        bool agree = std::abs(sol.y0 - direct.value) <= 3.0 * (sol.y0_se + direct.se);
        c.pass = std::abs(sol.y0 - c.reference) <= c.tolerance && agree;
        c.details = "direct=" + format_g17(direct.value) + " se=" + format_g17(direct.se);
    }));

    checks.push_back(timed_check("comparison_theorem_suite", [&](BenchmarkCheck& c) {
        std::mt19937_64 rng(seed ^ 0xC0FFEEULL);
        std::uniform_real_distribution<double> U01(0.0, 1.0);
        int violations = 0;
        double worst_margin = kInf;
        for (int pair = 0; pair < 100; ++pair) {
            double beta = 0.5 + 3.0 * U01(rng);
            double delta = (pair % 2 == 0) ? 0.0 : 0.08 * U01(rng);
            MarketParams params(1, PiecewiseConstant<VectorXd>(vec1(0.05)), MatrixXd::Constant(1, 1, 0.25),
                                PiecewiseConstant<double>(delta), beta, 1.0, 1.0, 1.0);
            PathGrid g = simulate_paths(params, 8, 4000, seed + 101 + pair);
            MatrixXd c1(g.paths, g.steps);
            for (int n = 0; n < g.steps; ++n) c1.col(n) = g.S[n].col(0);
            double up_c = 1.0 + U01(rng), up_xi = 1.0 + U01(rng);
            RewardSpec low, high;
            low.consumption = ConsumptionSpec::per_path(c1);
            low.terminal = TerminalSpec::asset_price(0);
            high.consumption = ConsumptionSpec::per_path(up_c * c1);
            high.terminal = TerminalSpec::per_path(up_xi * g.S.back().col(0));
            BsdeSolution y1 = solve_entropic_bsde(g, low, params);
            BsdeSolution y2 = solve_entropic_bsde(g, high, params);
            VectorXd w1 = y1.root_weights / pairwise_mean(y1.root_weights);
            VectorXd w2 = y2.root_weights / pairwise_mean(y2.root_weights);
            double eps = 3.0 * beta * sample_stats((w1 - w2).eval()).se + 1e-12;
            double margin = y2.y0 + eps - y1.y0;
            worst_margin = std::min(worst_margin, margin);
            if (margin < 0.0) ++violations;
        }
        c.computed = violations;
        c.reference = 0.0;
        c.tolerance = 0.0;
        c.pass = violations == 0;
        c.details = "pairs=100 worst_margin=" + format_g17(worst_margin);
    }));

    checks.push_back(timed_check("worst_case_density_normalization", [&](BenchmarkCheck& c) {
        SampleStats st = sample_stats(gauss_Zstar.col(gauss_grid.steps));
        MomentEstimate m2 = moment_check_Zstar(gauss_Zstar, 2.0);
        c.computed = st.mean;
        c.reference = 1.0;
        c.tolerance = 3.0 * st.se;
        c.pass = std::abs(st.mean - 1.0) <= c.tolerance && std::isfinite(m2.moment);
        c.details = "second_moment=" + format_g17(m2.moment);
    }));
    gauss_Zstar.resize(0, 0);

    checks.push_back(timed_check("picard_tree_oracle", [&](BenchmarkCheck& c) {
        MarketParams params(1, PiecewiseConstant<VectorXd>(vec1(0.05)), MatrixXd::Constant(1, 1, 0.3),
                            PiecewiseConstant<double>(0.1), 1.5, 1.0, 1.0, 1.0);
        PathGrid g = binomial_grid(params, 2);
        RewardSpec spec;
        MatrixXd cons(g.paths, 2);
        cons.col(0) = g.S[0].col(0);
        cons.col(1) = g.S[1].col(0);
        spec.consumption = ConsumptionSpec::per_path(cons);
        spec.terminal = TerminalSpec::asset_price(0);
        BsdeConfig cfg;
        cfg.ridge = 0.0;
        cfg.tol_picard = 1e-12;
        cfg.max_iters = 200;
        BsdeSolution sol = solve_entropic_bsde(g, spec, params, cfg);
        detail::RewardOnGrid reward = detail::evaluate_reward(g, spec, params);
        MatrixXd Ytree = tree_recursion_oracle(g, reward.running, reward.terminal, params);
        c.computed = (sol.Y - Ytree).cwiseAbs().maxCoeff();
        c.reference = 0.0;
        c.tolerance = 1e-8;
        c.pass = c.computed <= c.tolerance;
        c.details = "picard_iters=" + std::to_string(sol.picard_iters);
    }));

    // ---- criterion 5: Merton recovery (complete market, large beta)
    MarketParams merton = MarketParams::constant(vec1(0.1), MatrixXd::Constant(1, 1, 0.2), 0.0, 1e4, 0.0, 1.0, 1.0);
    PathGrid merton_grid = simulate_paths(merton, 50, 40000, seed + 7);
    RewardSpec log_spec;
    RetainedSolve merton_kept;
    checks.push_back(timed_check("merton_recovery", [&](BenchmarkCheck& c) {
        auto K = ConstraintSet::full_space(1);
        DualConfig dc;
        RobustSolution sol =
            solve_robust_problem(1.0, merton_grid, merton, K, log_spec, {KernelProcess::zero(1)}, dc);
        merton_kept = {sol.Y0, sol.dual.budget_gap, sol.xi_star};
        c.computed = sol.dual.lambda; // x = 1
        c.reference = 1.0;
        c.tolerance = 0.01;
        bool lambda_ok = std::abs(sol.dual.lambda - 1.0) <= 0.01;
        bool prop_ok = true;
        std::string meds;
        for (int n : {12, 25, 37}) {
            double med = median_of(sol.H_star[n].col(0).cwiseQuotient(sol.X_star.col(n)));
            prop_ok = prop_ok && std::abs(med / 2.5 - 1.0) <= 0.10;
            meds += (meds.empty() ? "" : ",") + format_g17(med);
        }
        c.pass = lambda_ok && prop_ok;
        c.details = "proportion_medians=" + meds + " reference=2.5";
    }));

    // ---- criterion 6: the two-asset incomplete-market closed form
    MatrixXd sigma2 = MatrixXd::Zero(2, 2);
    sigma2(0, 0) = 0.2;
    sigma2(1, 1) = 0.3;
    MarketParams ex1 = MarketParams::constant(vec2(0.1, 0.05), sigma2, 0.0, 1.0, 0.0, 1.0, 1.0);
    MarketParams ex1_inf = MarketParams::constant(vec2(0.1, 0.05), sigma2, 0.0, 1e4, 0.0, 1.0, 1.0);
    PathGrid ex1_grid = simulate_paths(ex1, 50, 80000, seed + 11);
    ConstraintSet ex1_K = ConstraintSet::box(vec2(-kInf, 0.0), vec2(kInf, 0.0));
    std::vector<KernelProcess> ex1_family = {KernelProcess::zero(2), KernelProcess::constant(vec2(0.0, -0.05))};
    RetainedSolve ex1_kept, ex1_inf_kept;
    checks.push_back(timed_check("example1_closed_form", [&](BenchmarkCheck& c) {
        Example1ClosedForm cf = example1_closed_form(ex1_grid, ex1, 1.0);
        DualConfig dc;
        double h2_max = 0.0, viol = 0.0;
        double theta_beta_pipeline = 0.0, theta_inf_pipeline = 0.0;
        {
            RobustSolution sol = solve_robust_problem(1.0, ex1_grid, ex1, ex1_K, log_spec, ex1_family, dc);
            ex1_kept = {sol.Y0, sol.dual.budget_gap, sol.xi_star};
            theta_beta_pipeline = pairwise_mean(sol.H_star[0].col(0)); // S_0 = 1: shares = amounts
            for (const MatrixXd& Hn : sol.H_star) h2_max = std::max(h2_max, Hn.col(1).cwiseAbs().maxCoeff());
            viol = sol.pre_projection_violation;
        }
        {
            RobustSolution sol = solve_robust_problem(1.0, ex1_grid, ex1_inf, ex1_K, log_spec, ex1_family, dc);
            ex1_inf_kept = {sol.Y0, sol.dual.budget_gap, sol.xi_star};
            theta_inf_pipeline = pairwise_mean(sol.H_star[0].col(0));
        }
        c.computed = theta_beta_pipeline;
        c.reference = cf.theta_beta(0, 0);
        c.tolerance = 0.05 * std::abs(c.reference);
        bool beta_ok = std::abs(c.computed - c.reference) <= c.tolerance;
        bool inf_ok = std::abs(theta_inf_pipeline - cf.theta_inf(0, 0)) <= 0.05 * cf.theta_inf(0, 0);
        bool h2_ok = h2_max == 0.0;
        c.pass = beta_ok && inf_ok && h2_ok;
        c.details = "theta_inf=" + format_g17(theta_inf_pipeline) + " ref_inf=" + format_g17(cf.theta_inf(0, 0)) +
                    " h2_max=" + format_g17(h2_max) + " pre_projection_violation=" + format_g17(viol);
    }));

    checks.push_back(timed_check("budget_equality", [&](BenchmarkCheck& c) {
        c.computed = std::max({merton_kept.budget_gap, ex1_kept.budget_gap, ex1_inf_kept.budget_gap});
        c.reference = 0.0;
        c.tolerance = 0.02;
        c.pass = c.computed <= c.tolerance;
        c.details = "merton=" + format_g17(merton_kept.budget_gap) + " example1=" + format_g17(ex1_kept.budget_gap) +
                    " example1_inf=" + format_g17(ex1_inf_kept.budget_gap);
    }));

    checks.push_back(timed_check("max_principle_self_consistency", [&](BenchmarkCheck& c) {
        auto resolve = [](const PathGrid& g, const MarketParams& params, const VectorXd& xi) {
            RewardSpec spec;
            spec.terminal = TerminalSpec::per_path(xi);
            return solve_entropic_bsde(g, spec, params).y0;
        };
        double d1 = std::abs(resolve(merton_grid, merton, merton_kept.xi_star) - merton_kept.Y0);
        double d2 = std::abs(resolve(ex1_grid, ex1, ex1_kept.xi_star) - ex1_kept.Y0);
        double d3 = std::abs(resolve(ex1_grid, ex1_inf, ex1_inf_kept.xi_star) - ex1_inf_kept.Y0);
        c.computed = std::max({d1, d2, d3});
        c.reference = 0.0;
        c.tolerance = 1e-3;
        c.pass = c.computed <= c.tolerance;
        c.details = "merton=" + format_g17(d1) + " example1=" + format_g17(d2) + " example1_inf=" + format_g17(d3);
    }));

    checks.push_back(timed_check("hjb_zero_kernel_oracle", [&](BenchmarkCheck& c) {
        HjbProblem prob;
        prob.b = 0.1;
        prob.sigma = 0.2;
        prob.beta = 1.0;
        prob.a_lo = -kInf;
        prob.a_hi = kInf; // infinite box: a = 0 is the only finite-penalty control
        HjbGrid grid = HjbGrid::log_spaced(0.02, 50.0, 201, 200, 1.0);
        DualValueSurface surf = solve_hjb(grid, prob);
        double max_err = 0.0;
        double lo = std::log(0.02), hi = std::log(50.0);
        for (Eigen::Index j = 0; j < grid.z.size(); ++j) {
            double x = std::log(grid.z(j));
            if (x < lo + 0.2 * (hi - lo) || x > hi - 0.2 * (hi - lo)) continue;
            max_err = std::max(max_err, std::abs(surf.v(0, j) - hjb_zero_kernel_oracle(prob, 0.0, grid.z(j), 1.0)));
        }
        auto table = hjb_convergence_study({{51, 50}, {101, 100}, {201, 200}}, 0.02, 50.0, 1.0, prob);
        double order = table.back().order;
        c.computed = max_err;
        c.reference = 0.0;
        c.tolerance = 1e-2;
        c.pass = max_err <= c.tolerance && order >= 0.9;
        c.details = "convergence_order=" + format_g17(order);
    }));

    checks.push_back(timed_check("support_function_exactness", [&](BenchmarkCheck& c) {
        std::mt19937_64 rng(seed ^ 0x5E1FULL);
        std::normal_distribution<double> N01;
        auto full = ConstraintSet::full_space(2);
        auto cone = ConstraintSet::nonneg_orthant_cone(2);
        auto box = ConstraintSet::box(vec2(-1.0, -0.5), vec2(2.0, 1.0));
        double max_diff = 0.0;
        int membership_mismatches = 0;
        int finite_cases = 0;
        for (int i = 0; i < 1000; ++i) {
            VectorXd x = vec2(N01(rng), N01(rng));
            if (x.norm() < 1e-12) continue;
            x /= x.norm();
            const ConstraintSet& K = (i % 3 == 0) ? full : (i % 3 == 1) ? cone : box;
            ExtReal sv = support_value(K, x);
            bool member = in_barrier_cone(K, x);
            bool member_expected = (i % 3 == 0) ? false : (i % 3 == 1) ? (x.array() >= 0.0).all() : true;
            if (member != member_expected) ++membership_mismatches;
            if (sv.is_finite()) {
                double bf = support_value_bruteforce(K, x, 601, 3.0);
                max_diff = std::max(max_diff, std::abs(sv.value() - bf));
                ++finite_cases;
            }
        }
        c.computed = max_diff;
        c.reference = 0.0;
        c.tolerance = 1e-2;
        c.pass = max_diff <= c.tolerance && membership_mismatches == 0;
        c.details = "finite_cases=" + std::to_string(finite_cases) +
                    " membership_mismatches=" + std::to_string(membership_mismatches);
    }));

    return checks;
}

nlohmann::json checks_json(const std::vector<BenchmarkCheck>& checks) {
    nlohmann::json arr = nlohmann::json::array();
    for (const BenchmarkCheck& c : checks) {
        arr.push_back({{"name", c.name},
                       {"computed", c.computed},
                       {"reference", c.reference},
                       {"tolerance", c.tolerance},
                       {"pass", c.pass},
                       {"details", c.details}});
    }
    return arr;
}

} // namespace

BenchmarkReport run_benchmark(std::uint64_t seed) {
    BenchmarkReport report;
    report.seed = seed;
    report.checks = run_checks(seed);

    // Reproducibility: an independent rerun must serialize to identical bytes.
    BenchmarkCheck repro = timed_check("benchmark_reproducibility", [&](BenchmarkCheck& c) {
        std::vector<BenchmarkCheck> second = run_checks(seed);
        bool identical = checks_json(report.checks).dump() == checks_json(second).dump();
        c.computed = identical ? 0.0 : 1.0;
        c.reference = 0.0;
        c.tolerance = 0.0;
        c.pass = identical;
        c.details = identical ? "rerun byte-identical" : "rerun diverged";
    });
    report.checks.push_back(repro);

    report.all_pass = true;
    for (const BenchmarkCheck& c : report.checks) report.all_pass = report.all_pass && c.pass;
    return report;
}

std::string benchmark_report_json(const BenchmarkReport& report) {
    nlohmann::json j;
    j["suite"] = "robustfolio-benchmark";
    j["seed"] = report.seed;
    j["checks"] = checks_json(report.checks);
    j["all_pass"] = report.all_pass;
    return j.dump(2) + "\n";
}

std::string benchmark_report_text(const BenchmarkReport& report) {
    std::ostringstream os;
    for (const BenchmarkCheck& c : report.checks) {
        os << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": computed=" << format_g17(c.computed)
           << " reference=" << format_g17(c.reference) << " tolerance=" << format_g17(c.tolerance) << " ("
           << static_cast<long>(c.runtime_ms) << " ms)";
        if (!c.details.empty()) os << " [" << c.details << "]";
        os << "\n";
    }
    os << (report.all_pass ? "ALL CHECKS PASSED" : "CHECK FAILURES PRESENT") << "\n";
    return os.str();
}

} // namespace rfolio
