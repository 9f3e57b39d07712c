#include <doctest.h>

#include <cmath>

#include "hidisc/errors.hpp"
#include "hidisc/prototypes.hpp"
#include "hidisc/rng.hpp"

using namespace hidisc;

namespace {

double max_cos(const Eigen::MatrixXd& u) {
    double best = -2.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < u.rows(); ++j) {
            best = std::max(best, u.row(i).dot(u.row(j)));
        }
    }
    return best;
}

}  // namespace

TEST_SUITE("prototypes") {

TEST_CASE("two prototypes in the plane are antipodal") {
    const PrototypeSet ps = place_prototypes(2, 2, 3);
    const double cos01 = ps.matrix().row(0).dot(ps.matrix().row(1));
    CHECK(cos01 == doctest::Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("three prototypes in the plane form an equilateral triangle") {
    // Brute-force oracle over angle grids (first direction fixed by rotation
    // invariance): the optimum has all pairwise cosines at -0.5.
    double grid_best = 2.0;
    const int steps = 720;
    for (int i = 0; i < steps; ++i) {
        const double t2 = 2.0 * M_PI * i / steps;
        for (int j = i; j < steps; ++j) {
            const double t3 = 2.0 * M_PI * j / steps;
            const double m = std::max({std::cos(t2), std::cos(t3), std::cos(t2 - t3)});
            grid_best = std::min(grid_best, m);
        }
    }
    CHECK(grid_best == doctest::Approx(-0.5).epsilon(1e-2));

    const PrototypeSet ps = place_prototypes(3, 2, 5);
    for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) {
            CHECK(ps.matrix().row(i).dot(ps.matrix().row(j)) ==
                  doctest::Approx(-0.5).epsilon(1e-2));
        }
    }
    CHECK(max_cos(ps.matrix()) <= grid_best + 1e-2);
}

TEST_CASE("seven prototypes in 32 dimensions separate well") {
    const PrototypeSet ps = place_prototypes(7, 32, 9);
    const double optimized = max_cos(ps.matrix());
    CHECK(optimized < 0.2);

    // 100 random placements; the optimized set must not be worse than any.
    Rng rng(123);
    double best_random = 2.0;
    for (int r = 0; r < 100; ++r) {
        Eigen::MatrixXd u(7, 32);
        for (int i = 0; i < 7; ++i) {
            for (int j = 0; j < 32; ++j) u(i, j) = rng.normal();
            u.row(i) /= u.row(i).norm();
        }
        best_random = std::min(best_random, max_cos(u));
    }
    CHECK(optimized <= best_random);
}

TEST_CASE("lookups and determinism") {
    const PrototypeSet a = place_prototypes(4, 8, 42);
    const PrototypeSet b = place_prototypes(4, 8, 42);
    CHECK(a.matrix() == b.matrix());  // bitwise
    CHECK(a.class_ids() == b.class_ids());

    CHECK((a.prototype_for("class0") - a.matrix().row(0).transpose()).norm() == 0.0);
    CHECK_THROWS_AS(a.prototype_for("no-such-class"), DataError);

    for (int i = 0; i < a.size(); ++i) {
        CHECK(std::abs(a.matrix().row(i).norm() - 1.0) < 1e-9);
    }
}

TEST_CASE("separation never exceeds the initialization") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        Rng rng(seed);
        Eigen::MatrixXd init(5, 6);
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 6; ++j) init(i, j) = rng.normal();
            init.row(i) /= init.row(i).norm();
        }
        const PrototypeSet ps = place_prototypes(5, 6, seed);
        CHECK(max_cos(ps.matrix()) <= max_cos(init) + 1e-12);
    }
}

TEST_CASE("degenerate dimensions are rejected") {
    CHECK_THROWS_AS(place_prototypes(3, 1, 0), ConfigError);
    CHECK_THROWS_AS(place_prototypes(1, 4, 0), ConfigError);
}

}  // TEST_SUITE
