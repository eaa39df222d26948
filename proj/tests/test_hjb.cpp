#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rfolio/hjb.hpp"

using namespace rfolio;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

HjbProblem example2_problem(double a_lo, double a_hi) {
    HjbProblem p;
    p.b = 0.1;
    p.sigma = 0.2;
    p.beta = 1.0;
    p.a_lo = a_lo;
    p.a_hi = a_hi;
    return p;
}

} // namespace

TEST_CASE("fenchel-legendre transform of the log terminal utility") {
    // beta = 1: sup_z(-1/z - z y) = -2 sqrt(y).
    for (double y : {0.1, 0.5, 1.0, 4.0}) {
        CHECK(fenchel_legendre_log(1.0, y) == doctest::Approx(-2.0 * std::sqrt(y)).epsilon(1e-12));
    }

    // Grid-search oracle agrees with the closed form on interior points.
    for (double beta : {0.5, 1.0, 2.0}) {
        for (double y : {0.1, 1.0, 7.5}) {
            CHECK(fenchel_legendre_gridsearch(beta, y) ==
                  doctest::Approx(fenchel_legendre_log(beta, y)).epsilon(1e-6));
        }
    }

    // Monotone decrease to -infinity in y.
    double prev = 0.0;
    for (double y = 0.5; y < 1e6; y *= 10.0) {
        double v = fenchel_legendre_log(1.3, y);
        CHECK(v < prev);
        prev = v;
    }
    CHECK(prev < -100.0);

    CHECK_THROWS_AS(fenchel_legendre_log(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(fenchel_legendre_log(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("terminal slice is the transform exactly") {
    HjbGrid g = HjbGrid::log_spaced(0.1, 10.0, 21, 5, 1.0);
    DualValueSurface s = solve_hjb(g, example2_problem(-0.2, 0.3));
    VectorXd expect = fenchel_legendre_transform(1.0, g.z);
    CHECK((s.v.row(g.nt).transpose() - expect).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s.a_star.row(g.nt).array() == 0.0).all());
}

TEST_CASE("infinite box forces the zero kernel and matches the quadrature oracle") {
    HjbProblem p = example2_problem(-kInf, kInf);
    HjbGrid g = HjbGrid::log_spaced(0.02, 50.0, 101, 100, 1.0);
    DualValueSurface s = solve_hjb(g, p);

    CHECK((s.a_star.array() == 0.0).all());
    CHECK(s.non_convex_slices == 0);

    double max_err = 0.0;
    double lo = std::log(0.02), hi = std::log(50.0);
    for (int j = 0; j < g.z.size(); ++j) {
        double x = std::log(g.z(j));
        if (x < lo + 0.2 * (hi - lo) || x > hi - 0.2 * (hi - lo)) continue;
        double oracle = hjb_zero_kernel_oracle(p, 0.0, g.z(j), 1.0);
        max_err = std::max(max_err, std::abs(s.v(0, j) - oracle));
    }
    CHECK(max_err <= 2e-2);

    // Lognormal-moment closed form cross-checks the quadrature oracle itself.
    double theta = p.b / p.sigma;
    double pexp = 1.0 / (1.0 + p.beta);
    for (double z : {0.5, 1.0, 5.0}) {
        double closed = fenchel_legendre_log(p.beta, z) * std::exp(0.5 * pexp * (pexp - 1.0) * theta * theta);
        CHECK(hjb_zero_kernel_oracle(p, 0.0, z, 1.0) == doctest::Approx(closed).epsilon(1e-10));
    }
}

TEST_CASE("drift-free box [0,0] run coincides with the forced zero-kernel run") {
    // With b = 0 the unpenalized maximizer is a = -b = 0, so the [0,0] box
    // (zero penalty everywhere) and the infinite box ({0} the only finite-
    // penalty control) solve the same scheme.
    HjbProblem zero_b = example2_problem(0.0, 0.0);
    zero_b.b = 0.0;
    HjbProblem forced = zero_b;
    forced.a_lo = -kInf;
    forced.a_hi = kInf;
    HjbGrid g = HjbGrid::log_spaced(0.05, 20.0, 61, 40, 1.0);
    DualValueSurface a = solve_hjb(g, zero_b);
    DualValueSurface b = solve_hjb(g, forced);
    CHECK((a.v - b.v).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("implicit and explicit schemes agree to scheme tolerance") {
    HjbProblem p = example2_problem(-0.2, 0.3);
    HjbGrid g = HjbGrid::log_spaced(0.05, 20.0, 81, 400, 1.0);
    HjbOptions imp;
    HjbOptions exp_opts;
    exp_opts.explicit_scheme = true;
    DualValueSurface si = solve_hjb(g, p, imp);
    DualValueSurface se = solve_hjb(g, p, exp_opts);
    CHECK((si.v.row(0) - se.v.row(0)).cwiseAbs().maxCoeff() <= 5e-3);
}

TEST_CASE("explicit scheme reports CFL violations") {
    HjbProblem p = example2_problem(-0.2, 0.3);
    HjbGrid g = HjbGrid::log_spaced(0.05, 20.0, 201, 5, 1.0); // dt far too large
    HjbOptions opts;
    opts.explicit_scheme = true;
    CHECK_THROWS_WITH_AS(solve_hjb(g, p, opts), doctest::Contains("CFL"), SolverError);
}

TEST_CASE("value slices stay convex and enlarging the box raises the value") {
    // A larger box K = [a_lo, a_hi] has a pointwise larger support penalty,
    // weakening the adversary: the infimum value can only increase.
    HjbGrid g = HjbGrid::log_spaced(0.05, 20.0, 81, 80, 1.0);
    DualValueSurface small = solve_hjb(g, example2_problem(-0.1, 0.1));
    DualValueSurface big = solve_hjb(g, example2_problem(-0.5, 0.5));
    CHECK(small.non_convex_slices == 0);
    CHECK(big.non_convex_slices == 0);
    CHECK(((big.v - small.v).array() >= -1e-9).all());

    // And the unconstrained-portfolio dual (forced a = 0) dominates both.
    DualValueSurface forced = solve_hjb(g, example2_problem(-kInf, kInf));
    CHECK(((forced.v - big.v).array() >= -1e-9).all());
}

TEST_CASE("self-convergence study") {
    HjbProblem p = example2_problem(-kInf, kInf);
    std::vector<RefinementLevel> levels = {{26, 25}, {51, 50}, {101, 100}, {201, 200}};
    auto table = hjb_convergence_study(levels, 0.02, 50.0, 1.0, p);
    REQUIRE(table.size() == 3);
    CHECK(table[0].sup_diff > table[1].sup_diff);
    CHECK(table[1].sup_diff > table[2].sup_diff);
    CHECK(table[2].order >= 0.9);

    // Identical grids give zero difference rows.
    auto flat = hjb_convergence_study({{51, 50}, {51, 50}, {51, 50}}, 0.02, 50.0, 1.0, p);
    for (const auto& row : flat) CHECK(row.sup_diff == 0.0);

    // Coarse smoke: a 10x10 grid still emits a finite table.
    auto coarse = hjb_convergence_study({{10, 10}, {20, 20}, {40, 40}}, 0.05, 20.0, 1.0, p);
    for (const auto& row : coarse) CHECK(std::isfinite(row.sup_diff));

    CHECK_THROWS_AS(hjb_convergence_study({{10, 10}, {20, 20}}, 0.05, 20.0, 1.0, p), std::invalid_argument);
}

TEST_CASE("grid construction guards") {
    CHECK_THROWS_AS(HjbGrid::log_spaced(-1.0, 10.0, 11, 10, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(HjbGrid::log_spaced(1.0, 0.5, 11, 10, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(HjbGrid::log_spaced(0.1, 10.0, 2, 10, 1.0), std::invalid_argument);
    HjbProblem bad = example2_problem(0.2, 0.3); // a_lo > 0
    HjbGrid g = HjbGrid::log_spaced(0.1, 10.0, 11, 10, 1.0);
    CHECK_THROWS_AS(solve_hjb(g, bad), std::invalid_argument);
}
