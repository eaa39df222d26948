#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rfolio/bsde.hpp"

using namespace rfolio;

namespace {

VectorXd vec1(double a) {
    VectorXd v(1);
    v << a;
    return v;
}

MarketParams gaussian_market(double beta) {
    // b = 0, sigma = 1: log S_t = -t/2 + W_t, so W_T is recoverable and
    // exp_gaussian terminals have exactly lognormal laws.
    return MarketParams::constant(vec1(0.0), MatrixXd::Identity(1, 1), 0.0, beta, 0.0, 1.0, 1.0);
}

/// Full binomial lattice: 2^N paths, step-n increment of path m determined by
/// bit (N-1-n) of m, each increment +-sqrt(dt).
PathGrid binomial_grid(const MarketParams& params, int N) {
    const Eigen::Index M = Eigen::Index(1) << N;
    const double T = params.horizon();
    const double sqdt = std::sqrt(T / N);
    std::vector<MatrixXd> dW(N, MatrixXd(M, 1));
    for (Eigen::Index m = 0; m < M; ++m) {
        for (int n = 0; n < N; ++n) {
            bool up = (m >> (N - 1 - n)) & 1;
            dW[n](m, 0) = up ? sqdt : -sqdt;
        }
    }
    return path_grid_from_increments(params, dW, T);
}

/// Exhaustive tree recursion of the discrete recursive relation: exact
/// conditional expectations by prefix-group averaging, iterated to its fixed
/// point. Independent of the regression solver.
MatrixXd tree_oracle(const PathGrid& g, const MatrixXd& running, const VectorXd& terminal,
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
            double delta_n = params.delta_at(g.time_at(n));
            VectorXd slice = delta_n * Y.col(n);
            if (running.size() > 0) slice -= running.col(n);
            exponent += (g.dt / beta) * slice;

            const Eigen::Index groups = Eigen::Index(1) << n;
            const Eigen::Index span = M / groups;
            for (Eigen::Index q = 0; q < groups; ++q) {
                double avg = 0.0;
                for (Eigen::Index m = q * span; m < (q + 1) * span; ++m) avg += std::exp(exponent(m));
                avg /= static_cast<double>(span);
                double y = -beta * std::log(avg);
                for (Eigen::Index m = q * span; m < (q + 1) * span; ++m) Ynew(m, n) = y;
            }
        }
        double change = (Ynew - Y).cwiseAbs().maxCoeff();
        Y = Ynew;
        if (change < 1e-13 && iter > 0) break;
    }
    return Y;
}

} // namespace

TEST_CASE("utility families") {
    Utility lg = Utility::log_utility();
    CHECK(lg.inv_deriv(0.25) == doctest::Approx(4.0));
    lg.check_shape();

    Utility pw = Utility::power(0.5);
    CHECK(pw.value(4.0) == doctest::Approx(4.0));
    CHECK(pw.inv_deriv(1.0) == doctest::Approx(1.0));
    pw.check_shape();
    CHECK_THROWS_AS(Utility::power(1.5), std::invalid_argument);
}

TEST_CASE("deterministic terminal: Y constant, Z zero") {
    auto params = gaussian_market(2.0);
    PathGrid g = simulate_paths(params, 6, 4000, 42);
    RewardSpec spec;
    spec.terminal = TerminalSpec::constant(3.0);
    BsdeSolution sol = solve_entropic_bsde(g, spec, params);
    double expect = std::log(3.0);
    CHECK((sol.Y.array() - expect).abs().maxCoeff() <= 1e-10);
    for (const MatrixXd& Zn : sol.Z) CHECK(Zn.cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(sol.picard_iters == 1);
    CHECK(sol.residual == 0.0);
}

TEST_CASE("lognormal terminal: Y0 = m - s^2/(2 beta)") {
    const double beta = 2.0, m = 0.3, s = 1.0;
    auto params = gaussian_market(beta);
    PathGrid g = simulate_paths(params, 12, 40000, 2024);
    RewardSpec spec;
    spec.terminal = TerminalSpec::exp_gaussian(m, s);

    Y0Estimate direct = evaluate_Y0_direct(g, spec, params);
    double truth = m - s * s / (2.0 * beta);
    CHECK(std::abs(direct.value - truth) <= 3.0 * direct.se);

    BsdeSolution sol = solve_entropic_bsde(g, spec, params);
    CHECK(std::abs(sol.y0 - truth) <= 3.0 * sol.y0_se);
    CHECK(std::abs(sol.y0 - direct.value) <= 3.0 * (sol.y0_se + direct.se));

    // Exact solution has Z identically s / sqrt(T) = 1; the extraction should
    // land near it at interior steps.
    for (int n : {2, 6, 10}) {
        CHECK(std::abs(pairwise_mean(sol.Z[n].col(0)) - 1.0) <= 0.05);
    }

    // Terminal condition exact (same scalar log as the reward evaluation).
    VectorXd xi = spec.terminal.evaluate(g);
    VectorXd yT(xi.size());
    for (Eigen::Index i = 0; i < xi.size(); ++i) yT(i) = std::log(xi(i));
    CHECK((sol.Y.col(g.steps) - yT).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("picard solver matches the exhaustive binomial tree to 1e-8") {
    MarketParams params(1, PiecewiseConstant<VectorXd>(vec1(0.05)), MatrixXd::Constant(1, 1, 0.3),
                        PiecewiseConstant<double>(0.1), 1.5, 1.0, 1.0, 1.0);
    PathGrid g = binomial_grid(params, 2);

    RewardSpec spec;
    MatrixXd c(g.paths, 2);
    c.col(0) = g.S[0].col(0);
    c.col(1) = g.S[1].col(0);
    spec.consumption = ConsumptionSpec::per_path(c);
    spec.terminal = TerminalSpec::asset_price(0);

    BsdeConfig cfg;
    cfg.ridge = 0.0;
    cfg.tol_picard = 1e-12;
    cfg.max_iters = 200;
    BsdeSolution sol = solve_entropic_bsde(g, spec, params, cfg);

    detail::RewardOnGrid reward = detail::evaluate_reward(g, spec, params);
    MatrixXd Ytree = tree_oracle(g, reward.running, reward.terminal, params);
    CHECK((sol.Y - Ytree).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(sol.residual <= cfg.tol_picard);
}

TEST_CASE("direct Y0 oracle edge cases") {
    auto params = gaussian_market(2.0);
    PathGrid g = simulate_paths(params, 8, 20000, 7);

    RewardSpec constant_spec;
    constant_spec.terminal = TerminalSpec::constant(5.0);
    Y0Estimate c = evaluate_Y0_direct(g, constant_spec, params);
    CHECK(c.value == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    CHECK(c.se <= 1e-12);

    // Large beta: first-order expansion gives the plain expectation.
    MarketParams big(1, PiecewiseConstant<VectorXd>(vec1(0.0)), MatrixXd::Identity(1, 1),
                     PiecewiseConstant<double>(0.0), 1e6, 0.0, 1.0, 1.0);
    RewardSpec spec;
    spec.terminal = TerminalSpec::exp_gaussian(0.0, 1.0);
    Y0Estimate direct = evaluate_Y0_direct(g, spec, big);
    VectorXd ubar = spec.terminal.evaluate(g).array().log();
    SampleStats plain = sample_stats(ubar);
    CHECK(std::abs(direct.value - plain.mean) <= 3.0 * plain.se + 1e-3);

    MarketParams with_delta(1, PiecewiseConstant<VectorXd>(vec1(0.0)), MatrixXd::Identity(1, 1),
                            PiecewiseConstant<double>(0.1), 1.0, 0.0, 1.0, 1.0);
    CHECK_THROWS_AS(evaluate_Y0_direct(g, spec, with_delta), std::invalid_argument);
}

TEST_CASE("worst-case density") {
    auto params = gaussian_market(2.0);
    PathGrid g = simulate_paths(params, 12, 40000, 2024);

    RewardSpec constant_spec;
    constant_spec.terminal = TerminalSpec::constant(3.0);
    BsdeSolution flat = solve_entropic_bsde(g, constant_spec, params);
    MatrixXd Zflat = worst_case_density(flat, params, g);
    CHECK((Zflat.array() - 1.0).abs().maxCoeff() <= 1e-8);

    RewardSpec spec;
    spec.terminal = TerminalSpec::exp_gaussian(0.0, 1.0);
    BsdeSolution sol = solve_entropic_bsde(g, spec, params);
    MatrixXd Zstar = worst_case_density(sol, params, g);
    CHECK((Zstar.array() > 0.0).all());
    CHECK((Zstar.col(0).array() == 1.0).all());

    SampleStats st = sample_stats(Zstar.col(g.steps));
    CHECK(std::abs(st.mean - 1.0) <= 3.0 * st.se);

    MomentEstimate m1 = moment_check_Zstar(Zstar, 1.0);
    CHECK(std::abs(m1.moment - 1.0) <= 3.0 * m1.se);
    MomentEstimate m2 = moment_check_Zstar(Zstar, 2.0);
    CHECK(std::isfinite(m2.moment));
    CHECK(moment_check_Zstar(MatrixXd::Ones(100, 3), 2.0).moment == doctest::Approx(1.0));
    CHECK_THROWS_AS(moment_check_Zstar(Zstar, 0.5), std::invalid_argument);

    // Cross-formula consistency: log Z*_t also equals
    // (1/beta) int (delta Y - alpha U) ds - (Y_t - Y_0)/beta pathwise.
    const double beta = params.beta();
    for (int n : {4, 8, 12}) {
        VectorXd lhs = Zstar.col(n).array().log();
        VectorXd rhs = -(sol.Y.col(n).array() - sol.y0) / beta; // delta = 0, alpha = 0
        double rms = std::sqrt((lhs - rhs).squaredNorm() / static_cast<double>(g.paths));
        CHECK(rms <= 0.02);
    }
}

TEST_CASE("comparison theorem surrogate on randomized pairs") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> U01(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        double beta = 0.5 + 3.0 * U01(rng);
        double delta = (trial % 2 == 0) ? 0.0 : 0.08 * U01(rng);
        MarketParams params(1, PiecewiseConstant<VectorXd>(vec1(0.05)), MatrixXd::Constant(1, 1, 0.25),
                            PiecewiseConstant<double>(delta), beta, 1.0, 1.0, 1.0);
        PathGrid g = simulate_paths(params, 8, 4000, 1000 + trial);

        MatrixXd c1(g.paths, g.steps);
        for (int n = 0; n < g.steps; ++n) c1.col(n) = g.S[n].col(0);
        double up_c = 1.0 + U01(rng);
        double up_xi = 1.0 + U01(rng);

        RewardSpec low, high;
        low.consumption = ConsumptionSpec::per_path(c1);
        low.terminal = TerminalSpec::asset_price(0);
        high.consumption = ConsumptionSpec::per_path(up_c * c1);
        high.terminal = TerminalSpec::per_path(up_xi * g.S.back().col(0));

        BsdeSolution y1 = solve_entropic_bsde(g, low, params);
        BsdeSolution y2 = solve_entropic_bsde(g, high, params);

        // combined SE of the difference with common random numbers
        VectorXd w1 = y1.root_weights / pairwise_mean(y1.root_weights);
        VectorXd w2 = y2.root_weights / pairwise_mean(y2.root_weights);
        SampleStats dif = sample_stats((w1 - w2).eval());
        double eps = 3.0 * beta * dif.se + 1e-12;
        CHECK(y1.y0 <= y2.y0 + eps);
    }
}

TEST_CASE("monotone continuity in the terminal payoff") {
    auto params = MarketParams::constant(vec1(0.05), MatrixXd::Constant(1, 1, 0.2), 0.0, 1.5, 0.0, 1.0, 1.0);
    PathGrid g = simulate_paths(params, 8, 20000, 55);
    VectorXd xi = g.S.back().col(0);

    RewardSpec base;
    base.terminal = TerminalSpec::per_path(xi);
    double y_limit = evaluate_Y0_direct(g, base, params).value;

    double prev = std::numeric_limits<double>::infinity();
    double last_gap = 0.0;
    for (double n : {1.0, 4.0, 16.0, 64.0, 256.0}) {
        RewardSpec bumped;
        bumped.terminal = TerminalSpec::per_path((xi.array() + 1.0 / n).matrix());
        double y = evaluate_Y0_direct(g, bumped, params).value;
        CHECK(y <= prev + 1e-12);
        CHECK(y >= y_limit - 1e-12);
        // entropic certainty equivalents are dominated by the sup of the bump
        double bound = ((xi.array() + 1.0 / n).log() - xi.array().log()).maxCoeff();
        CHECK(y - y_limit <= bound + 1e-12);
        prev = y;
        last_gap = y - y_limit;
    }
    CHECK(last_gap <= 0.05);
}

TEST_CASE("jensen bound and duality consistency at Q*") {
    auto params = gaussian_market(2.0);
    PathGrid g = simulate_paths(params, 12, 40000, 321);
    RewardSpec spec;
    spec.terminal = TerminalSpec::exp_gaussian(0.0, 1.0);

    BsdeSolution sol = solve_entropic_bsde(g, spec, params);
    VectorXd ubar = spec.terminal.evaluate(g).array().log();
    SampleStats plain = sample_stats(ubar);
    CHECK(sol.y0 <= plain.mean + 3.0 * (plain.se + sol.y0_se));

    MatrixXd Zstar = worst_case_density(sol, params, g);
    VectorXd R = relative_entropy_penalty(Zstar, params, g, 0);
    VectorXd rhs_sample = Zstar.col(g.steps).cwiseProduct(ubar + params.beta() * R);
    SampleStats rhs = sample_stats(rhs_sample);
    CHECK(std::abs(sol.y0 - rhs.mean) <= 3.0 * (rhs.se + sol.y0_se));
}

TEST_CASE("error paths") {
    auto params = MarketParams::constant(vec1(0.05), MatrixXd::Constant(1, 1, 0.2), 0.2, 1.0, 1.0, 1.0, 1.0);
    PathGrid g = simulate_paths(params, 6, 2000, 3);

    RewardSpec spec;
    spec.consumption = ConsumptionSpec::constant_rate(1.0);
    spec.terminal = TerminalSpec::asset_price(0);
    BsdeConfig cfg;
    cfg.max_iters = 1;
    CHECK_THROWS_WITH_AS(solve_entropic_bsde(g, spec, params, cfg), doctest::Contains("residual history"),
                         SolverError);

    RewardSpec zero_c;
    zero_c.consumption = ConsumptionSpec::constant_rate(0.0);
    zero_c.terminal = TerminalSpec::constant(1.0);
    CHECK_THROWS_AS(solve_entropic_bsde(g, zero_c, params), std::invalid_argument); // log(0) consumption

    RewardSpec missing_c;
    missing_c.terminal = TerminalSpec::constant(1.0);
    CHECK_THROWS_AS(solve_entropic_bsde(g, missing_c, params), std::invalid_argument); // alpha > 0, no consumption
}

TEST_CASE("custom utilities are shape-checked at use") {
    auto params = gaussian_market(1.0);
    PathGrid g = simulate_paths(params, 4, 200, 2);
    RewardSpec spec;
    // convex "utility": the spot check must reject it
    spec.Ubar = Utility::custom([](double z) { return z * z; }, [](double z) { return 2.0 * z; },
                                [](double y) { return y / 2.0; });
    spec.terminal = TerminalSpec::constant(1.0);
    CHECK_THROWS_AS(solve_entropic_bsde(g, spec, params), std::invalid_argument);

    // a log-shaped custom utility passes
    spec.Ubar = Utility::custom([](double z) { return std::log(z); }, [](double z) { return 1.0 / z; },
                                [](double y) { return 1.0 / y; });
    CHECK_NOTHROW(solve_entropic_bsde(g, spec, params));
}
