#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rfolio/constraint_set.hpp"

using namespace rfolio;

namespace {

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

MatrixXd triangle_vertices() {
    MatrixXd V(2, 3);
    V << 0, 1, 0,
         0, 0, 1;
    return V;
}

} // namespace

TEST_CASE("extended real arithmetic") {
    ExtReal a(1.5), b(2.0);
    CHECK((a + b).value() == doctest::Approx(3.5));
    CHECK(!(a + ExtReal::infinity()).is_finite());
    CHECK(ExtReal::infinity().scaled(0.0).value() == 0.0);
    CHECK(!ExtReal::infinity().scaled(2.0).is_finite());
    CHECK(a < ExtReal::infinity());
    CHECK_THROWS_AS(ExtReal::infinity().value(), std::domain_error);
}

TEST_CASE("support function closed forms") {
    auto full = ConstraintSet::full_space(2);
    CHECK(support_value(full, vec2(0, 0)).value() == 0.0);
    CHECK(!support_value(full, vec2(1, 0)).is_finite());

    auto cone = ConstraintSet::nonneg_orthant_cone(2);
    CHECK(support_value(cone, vec2(1, 2)).value() == 0.0);
    CHECK(!support_value(cone, vec2(1, -0.1)).is_finite());

    auto box = ConstraintSet::box(vec1(-1), vec1(2));
    CHECK(support_value(box, vec1(3)).value() == doctest::Approx(3.0));
    CHECK(support_value(box, vec1(-2)).value() == doctest::Approx(4.0)); // upper bound 2 times |x|

    // Infinite bounds short-circuit on the penalized side.
    auto half = ConstraintSet::box(vec2(-std::numeric_limits<double>::infinity(), 0),
                                   vec2(std::numeric_limits<double>::infinity(), 0));
    CHECK(!support_value(half, vec2(1, 5)).is_finite());
    CHECK(support_value(half, vec2(0, 5)).value() == 0.0);

    CHECK_THROWS_AS(support_value(full, vec1(1)), std::invalid_argument);
}

TEST_CASE("barrier cone membership matches the closed-form cones") {
    auto full = ConstraintSet::full_space(2);
    auto cone = ConstraintSet::nonneg_orthant_cone(2);
    auto box = ConstraintSet::box(vec2(-1, -0.5), vec2(2, 1));

    CHECK(!in_barrier_cone(full, vec2(1, 0)));
    CHECK(in_barrier_cone(full, vec2(0, 0)));
    CHECK(in_barrier_cone(cone, vec2(1, 2)));
    CHECK(!in_barrier_cone(cone, vec2(-1, 2)));
    CHECK(in_barrier_cone(box, vec2(-7, -7)));

    std::mt19937_64 rng(7);
    std::normal_distribution<double> N01;
    for (int i = 0; i < 500; ++i) {
        VectorXd x = vec2(N01(rng), N01(rng));
        CHECK(in_barrier_cone(full, x) == ((x.array() == 0.0).all()));
        CHECK(in_barrier_cone(cone, x) == ((x.array() >= 0.0).all()));
        CHECK(in_barrier_cone(box, x));
    }
}

TEST_CASE("projection") {
    auto box = ConstraintSet::box(vec1(-1), vec1(2));
    CHECK(project(box, vec1(5))(0) == doctest::Approx(2.0));
    CHECK(project(box, vec1(-3))(0) == doctest::Approx(-1.0));

    auto cone = ConstraintSet::nonneg_orthant_cone(2);
    VectorXd p = project(cone, vec2(-1, 3));
    CHECK(p(0) == 0.0);
    CHECK(p(1) == 3.0);

    // y in K stays fixed and projection is idempotent, for every family.
    auto box2 = ConstraintSet::box(vec2(-1, -0.5), vec2(2, 1));
    auto hull = ConstraintSet::polytope_hull(triangle_vertices());
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-2.0, 3.0);
    for (int i = 0; i < 50; ++i) {
        VectorXd y = vec2(U(rng), U(rng));
        for (const ConstraintSet* K : {&box2, &cone, &hull}) {
            VectorXd p1 = project(*K, y);
            CHECK(K->contains(p1, 1e-7));
            VectorXd p2 = project(*K, p1);
            CHECK((p2 - p1).norm() <= 1e-7);
        }
    }

    // Known hull projection: (2,2) onto the unit triangle lands at (.5,.5).
    VectorXd q = project(hull, vec2(2, 2));
    CHECK(q(0) == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(q(1) == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("brute force oracle") {
    auto box = ConstraintSet::box(vec1(-1), vec1(2));
    double bf = support_value_bruteforce(box, vec1(3), 1001);
    CHECK(bf == doctest::Approx(3.0).epsilon(0.01));

    auto degenerate = ConstraintSet::box(vec1(0), vec1(0));
    CHECK(support_value_bruteforce(degenerate, vec1(17), 11) == doctest::Approx(0.0));
    CHECK(support_value(degenerate, vec1(17)).value() == 0.0);

    auto hull = ConstraintSet::polytope_hull(triangle_vertices());
    CHECK(support_value_bruteforce(hull, vec2(-1, -1), 101) == doctest::Approx(1.0));
    CHECK(support_value(hull, vec2(-1, -1)).value() == doctest::Approx(1.0));

    CHECK_THROWS_AS(support_value_bruteforce(ConstraintSet::full_space(1), vec1(1), 11), std::invalid_argument);
    CHECK_NOTHROW(support_value_bruteforce(ConstraintSet::full_space(1), vec1(1), 11, 5.0));
}

TEST_CASE("support function invariants") {
    auto box = ConstraintSet::box(vec2(-1, -0.5), vec2(2, 1));
    auto hull = ConstraintSet::polytope_hull(triangle_vertices());
    std::mt19937_64 rng(23);
    std::normal_distribution<double> N01;

    for (const ConstraintSet* K : {&box, &hull}) {
        CHECK(support_value(*K, VectorXd::Zero(2)).value() == doctest::Approx(0.0));
        for (int i = 0; i < 200; ++i) {
            VectorXd x1 = vec2(N01(rng), N01(rng));
            VectorXd x2 = vec2(N01(rng), N01(rng));
            double s1 = support_value(*K, x1).value();
            double s2 = support_value(*K, x2).value();
            double s12 = support_value(*K, x1 + x2).value();
            CHECK(s12 <= s1 + s2 + 1e-12);

            double t = std::abs(N01(rng)) + 0.1;
            CHECK(support_value(*K, t * x1).value() == doctest::Approx(t * s1).epsilon(1e-12));

            // brute force is a convergent lower bound
            double bf = support_value_bruteforce(*K, x1, 201);
            CHECK(s1 >= bf - 1e-9);
            CHECK(s1 - bf <= 0.05 * (1.0 + x1.lpNorm<1>()));
        }
    }
}

TEST_CASE("construction guards") {
    CHECK_THROWS_AS(ConstraintSet::box(vec1(0.5), vec1(2)), std::invalid_argument);
    CHECK_THROWS_AS(ConstraintSet::box(vec1(-1), vec1(-0.5)), std::invalid_argument);
    MatrixXd far(2, 2);
    far << 1, 2,
           1, 2;
    CHECK_THROWS_AS(ConstraintSet::polytope_hull(far), std::invalid_argument); // origin outside
}
