#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rfolio/closed_forms.hpp"
#include "rfolio/scenario.hpp"

using namespace rfolio;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path write_temp(const std::string& name, const std::string& content) {
    fs::path p = fs::temp_directory_path() / name;
    std::ofstream os(p);
    os << content;
    return p;
}

const char* kSmallSim =
    "mode = simulate\n"
    "market.b = 0.1\n"
    "market.sigma = 0.2\n"
    "market.T = 1\n"
    "grid.steps = 8\n"
    "grid.paths = 32\n"
    "grid.seed = 7\n";

} // namespace

TEST_CASE("flat config parsing") {
    fs::path p = write_temp("rfolio_sc_parse.cfg",
                            "# comment\n"
                            "mode = optimize\n"
                            "scenario.name = demo\n"
                            "market.b = 0.1,0.05\n"
                            "market.sigma = diag:0.2,0.3\n"
                            "market.delta = 0:0.1;0.5:0\n"
                            "market.T = 2\n"
                            "market.beta = 1.5\n"
                            "constraint.kind = box\n"
                            "constraint.lower = -inf,0\n"
                            "constraint.upper = inf,0\n"
                            "grid.steps = 12\n"
                            "grid.paths = 500\n"
                            "grid.seed = 99\n"
                            "dual.kernel_grid = 0,-0.05;0,0.1\n");
    Scenario sc = load_scenario(p.string());
    CHECK(sc.name == "demo");
    CHECK(sc.mode == RunMode::Optimize);
    REQUIRE(sc.market.has_value());
    CHECK(sc.market->dim() == 2);
    CHECK(sc.market->drift_at(0.0)(1) == doctest::Approx(0.05));
    CHECK(sc.market->sigma()(1, 1) == doctest::Approx(0.3));
    CHECK(sc.market->delta_at(0.25) == doctest::Approx(0.1));
    CHECK(sc.market->delta_at(0.75) == 0.0);
    CHECK(sc.market->beta() == doctest::Approx(1.5));
    REQUIRE(sc.constraint.has_value());
    CHECK(sc.constraint->kind() == ConstraintSet::Kind::Box);
    CHECK(std::isinf(sc.constraint->upper()(0)));
    CHECK(sc.grid.seed == 99);
    REQUIRE(sc.dual.kernel_grid.size() == 2);
    CHECK(sc.dual.kernel_grid[0](1) == doctest::Approx(-0.05));
}

TEST_CASE("unknown keys and malformed lines are rejected with locations") {
    fs::path p = write_temp("rfolio_sc_bad.cfg", "mode = simulate\nmarket.bogus = 1\n");
    CHECK_THROWS_WITH_AS(load_scenario(p.string()), doctest::Contains("line 2"), ConfigError);
    CHECK_THROWS_WITH_AS(load_scenario(p.string()), doctest::Contains("market.bogus"), ConfigError);

    fs::path q = write_temp("rfolio_sc_noeq.cfg", "mode simulate\n");
    CHECK_THROWS_WITH_AS(load_scenario(q.string()), doctest::Contains("key = value"), ConfigError);

    CHECK_THROWS_AS(parse_mode("turbo"), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/path.cfg"), ConfigError);
}

TEST_CASE("mode-specific required blocks") {
    fs::path p = write_temp("rfolio_sc_nomarket.cfg", "mode = optimize\n");
    CHECK_THROWS_WITH_AS(load_scenario(p.string()), doctest::Contains("market"), ConfigError);

    fs::path q = write_temp("rfolio_sc_noxi.cfg",
                            "mode = solve-bsde\nmarket.b = 0\nmarket.sigma = 1\nmarket.T = 1\n");
    CHECK_THROWS_WITH_AS(load_scenario(q.string()), doctest::Contains("reward.xi"), ConfigError);
}

TEST_CASE("json configs flatten to the same scenario") {
    fs::path p = write_temp("rfolio_sc.json",
                            "{\"mode\":\"simulate\",\"market\":{\"b\":[0.1,0.05],\"sigma\":\"diag:0.2,0.3\","
                            "\"T\":1},\"grid\":{\"steps\":8,\"paths\":16,\"seed\":3}}");
    Scenario sc = load_scenario(p.string());
    CHECK(sc.mode == RunMode::Simulate);
    CHECK(sc.market->dim() == 2);
    CHECK(sc.grid.paths == 16);
}

TEST_CASE("overrides take precedence") {
    fs::path p = write_temp("rfolio_sc_ovr.cfg", kSmallSim);
    Scenario sc = load_scenario(p.string(), {"grid.seed=123", "grid.paths=64"});
    CHECK(sc.grid.seed == 123);
    CHECK(sc.grid.paths == 64);
    CHECK(sc.resolved.at("grid.seed") == "123");
}

TEST_CASE("simulate artifacts are deterministic byte for byte") {
    fs::path p = write_temp("rfolio_sc_sim.cfg", kSmallSim);
    Scenario sc = load_scenario(p.string());
    fs::path out1 = fs::temp_directory_path() / "rfolio_sim_out1";
    fs::path out2 = fs::temp_directory_path() / "rfolio_sim_out2";
    sc.out_dir = out1.string();
    CHECK(run_scenario(sc) == 0);
    sc.out_dir = out2.string();
    CHECK(run_scenario(sc) == 0);

    std::string csv1 = read_file(out1 / "paths.csv");
    std::string csv2 = read_file(out2 / "paths.csv");
    CHECK(csv1 == csv2);
    CHECK(csv1.find("path,t,S_1,Z_nu,A_nu,X") != std::string::npos);
    CHECK(csv1.find("# grid.seed = 7") != std::string::npos); // config embedded

    std::string summary = read_file(out1 / "summary.json");
    CHECK(summary.find("\"mode\": \"simulate\"") != std::string::npos);
    CHECK(summary.find("\"grid.seed\": \"7\"") != std::string::npos);
}

TEST_CASE("solve-bsde artifacts") {
    fs::path p = write_temp("rfolio_sc_bsde.cfg",
                            "mode = solve-bsde\n"
                            "market.b = 0\nmarket.sigma = 1\nmarket.T = 1\nmarket.beta = 2\n"
                            "market.alpha_bar = 1\n"
                            "grid.steps = 10\ngrid.paths = 4000\ngrid.seed = 5\n"
                            "reward.xi = exp_gaussian:0,1\n"
                            "output.bsde_paths = 3\n");
    Scenario sc = load_scenario(p.string());
    fs::path out = fs::temp_directory_path() / "rfolio_bsde_out";
    sc.out_dir = out.string();
    CHECK(run_scenario(sc) == 0);
    std::string summary = read_file(out / "summary.json");
    CHECK(summary.find("\"Y0\"") != std::string::npos);
    CHECK(summary.find("\"picard_iters\"") != std::string::npos);
    std::string csv = read_file(out / "bsde.csv");
    CHECK(csv.find("path,t,Y,Z_1,Zstar") != std::string::npos);
}

TEST_CASE("optimize artifacts carry the dual state") {
    fs::path p = write_temp("rfolio_sc_opt.cfg",
                            "mode = optimize\n"
                            "market.b = 0.1\nmarket.sigma = 0.2\nmarket.T = 1\nmarket.beta = 1e4\n"
                            "grid.steps = 16\ngrid.paths = 8000\ngrid.seed = 9\n"
                            "dual.x0 = 2\n");
    Scenario sc = load_scenario(p.string());
    fs::path out = fs::temp_directory_path() / "rfolio_opt_out";
    sc.out_dir = out.string();
    CHECK(run_scenario(sc) == 0);
    std::string solution = read_file(out / "solution.json");
    CHECK(solution.find("\"lambda\"") != std::string::npos);
    CHECK(solution.find("\"theta0\"") != std::string::npos);
    std::string csv = read_file(out / "solution.csv");
    CHECK(csv.find("t,mean_c,mean_H_1,mean_X") != std::string::npos);

    // lambda for log utility at x = 2 sits near 1/2
    auto pos = solution.find("\"lambda\": ");
    double lambda = std::stod(solution.substr(pos + 10));
    CHECK(lambda == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("hjb artifacts") {
    fs::path p = write_temp("rfolio_sc_hjb.cfg",
                            "mode = hjb\n"
                            "market.b = 0.1\nmarket.sigma = 0.2\nmarket.T = 1\nmarket.beta = 1\n"
                            "hjb.z_min = 0.05\nhjb.z_max = 20\nhjb.nz = 41\nhjb.nt = 20\n"
                            "hjb.a_lo = -0.2\nhjb.a_hi = 0.3\n");
    Scenario sc = load_scenario(p.string());
    fs::path out = fs::temp_directory_path() / "rfolio_hjb_out";
    sc.out_dir = out.string();
    CHECK(run_scenario(sc) == 0);
    std::string csv = read_file(out / "hjb_surface.csv");
    CHECK(csv.find("t,z,v,a_star") != std::string::npos);
}

TEST_CASE("example-1 closed forms: pinned values") {
    MatrixXd sigma = MatrixXd::Zero(2, 2);
    sigma(0, 0) = 0.2;
    sigma(1, 1) = 0.3;
    VectorXd b(2);
    b << 0.1, 0.05;
    auto params = MarketParams::constant(b, sigma, 0.0, 1.0, 0.0, 1.0, 1.0);
    PathGrid g = simulate_paths(params, 10, 200, 17);
    Example1ClosedForm cf = example1_closed_form(g, params, 1.0);

    // X*_0 = x exactly.
    CHECK((cf.X_star.col(0).array() == 1.0).all());

    // Share formula at t = 0: exp(-(1/4)*0.01/(2*0.04)) * (1/2) * (0.1/0.04).
    double pinned = std::exp(-0.25 * 0.01 / 0.08) * 0.5 * 2.5;
    CHECK(pinned == doctest::Approx(1.2115415430954299).epsilon(1e-12));
    CHECK(cf.theta_beta(0, 0) == doctest::Approx(pinned).epsilon(1e-12));
    CHECK((cf.theta_beta.col(0).array() == cf.theta_beta(0, 0)).all());

    // Large-beta limit at t = 0: x b1 / (sigma1^2 Ztilde_0 S1_0) = 2.5.
    CHECK(cf.theta_inf(0, 0) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK((cf.Ztilde.array() > 0.0).all());
    CHECK((cf.Ztilde.col(0).array() == 1.0).all());

    auto bad = MarketParams::constant((VectorXd(1) << 0.1).finished(), MatrixXd::Constant(1, 1, 0.2), 0.0, 1.0,
                                      0.0, 1.0, 1.0);
    PathGrid g1 = simulate_paths(bad, 4, 10, 1);
    CHECK_THROWS_AS(example1_closed_form(g1, bad, 1.0), std::invalid_argument);
}

TEST_CASE("merton log reference") {
    MertonLogReference zero = merton_log_reference(0.0, 0.2, 3.0, 1.0);
    CHECK(zero.proportion == 0.0);
    CHECK(zero.value == doctest::Approx(std::log(3.0)).epsilon(1e-12));

    MertonLogReference ref = merton_log_reference(0.1, 0.2, 1.0, 1.0);
    CHECK(ref.proportion == doctest::Approx(2.5));
    CHECK(ref.value == doctest::Approx(0.125).epsilon(1e-10)); // theta^2 T / 2
}

TEST_CASE("scenario files shipped with the repo parse") {
    for (const char* name : {"gbm_1d", "gaussian_terminal", "merton", "example1", "hjb_box", "benchmark"}) {
        fs::path p = fs::path(RFOLIO_SOURCE_DIR) / "scenarios" / (std::string(name) + ".cfg");
        CHECK_NOTHROW(load_scenario(p.string()));
    }
}

TEST_CASE("example1 scenario emits the closed-form share comparison") {
    fs::path p = fs::path(RFOLIO_SOURCE_DIR) / "scenarios" / "example1.cfg";
    Scenario sc = load_scenario(p.string(), {"grid.paths=4000", "grid.steps=10"});
    fs::path out = fs::temp_directory_path() / "rfolio_ex1_out";
    sc.out_dir = out.string();
    CHECK(run_scenario(sc) == 0);
    std::string solution = read_file(out / "solution.json");
    CHECK(solution.find("\"example1_reference\"") != std::string::npos);
    CHECK(solution.find("\"theta_beta_0\"") != std::string::npos);
}
