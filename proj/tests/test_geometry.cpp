#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "hidisc/geometry.hpp"
#include "hidisc/gradcheck.hpp"
#include "hidisc/rng.hpp"

using namespace hidisc;

namespace {

Vec v2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("mobius addition identities") {
    const Vec a = v2(0.3, 0.1);
    CHECK((mobius_add(a, v2(0.0, 0.0), 1.0) - a).norm() < 1e-12);
    CHECK(mobius_add(v2(-0.3, -0.1), a, 1.0).norm() < 1e-12);
}

TEST_CASE("mobius addition matches the closed form on collinear points") {
    // Scalar oracle: for a=(x,0), b=(y,0), c the formula collapses to
    // ((1+2cxy+cy^2)x + (1-cx^2)y) / (1+2cxy+c^2x^2y^2).
    const double x = 0.5, y = 0.2, c = 1.0;
    const double num = (1.0 + 2.0 * c * x * y + c * y * y) * x + (1.0 - c * x * x) * y;
    const double den = 1.0 + 2.0 * c * x * y + c * c * x * x * y * y;
    const Vec m = mobius_add(v2(x, 0.0), v2(y, 0.0), c);
    CHECK(m(0) == doctest::Approx(num / den).epsilon(1e-12));
    CHECK(m(1) == doctest::Approx(0.0));
}

TEST_CASE("mobius addition rejects non-finite input") {
    CHECK_THROWS_AS(mobius_add(v2(std::nan(""), 0.0), v2(0.0, 0.0), 1.0), std::invalid_argument);
    CHECK_THROWS_AS(distance(v2(0.1, 0.0), v2(INFINITY, 0.0), 1.0), std::invalid_argument);
}

TEST_CASE("distance basics") {
    const Vec a = v2(0.4, 0.4);
    CHECK(distance(a, a, 0.7) == doctest::Approx(0.0));
    CHECK(distance(v2(0.5, 0.0), v2(0.0, 0.0), 1.0) ==
          doctest::Approx(2.0 * std::atanh(0.5)).epsilon(1e-12));
    // Near-flat limit.
    const double d = distance(v2(0.9, 0.0), v2(-0.9, 0.0), 1e-9);
    CHECK(std::abs(d - 3.6) / 3.6 < 1e-3);
    // Symmetry.
    const Vec b = v2(-0.2, 0.6);
    CHECK(distance(a, b, 1.0) == doctest::Approx(distance(b, a, 1.0)).epsilon(1e-15));
}

TEST_CASE("exp map at the origin") {
    CHECK(exp_map0(v2(0.0, 0.0), 0.3).norm() == 0.0);
    const Vec z = exp_map0(v2(0.5, 0.0), 1.0);
    CHECK(z(0) == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
    CHECK(z(1) == doctest::Approx(0.0));
    Vec v(3);
    v << 1.0, 2.0, 3.0;
    const Vec near_flat = exp_map0(v, 1e-9);
    CHECK((near_flat - v).norm() / v.norm() < 1e-3);
}

TEST_CASE("log map inverts the exp map") {
    CHECK(log_map0(v2(0.0, 0.0), 1.0).norm() == 0.0);
    const Vec u0 = v2(0.7, -0.2);
    const Vec back = log_map0(exp_map0(u0, 0.05), 0.05);
    CHECK((back - u0).norm() < 1e-6);
    const Vec u = log_map0(v2(0.4, 0.0), 1.0);
    CHECK(u(0) == doctest::Approx(std::atanh(0.4)).epsilon(1e-12));
    CHECK_THROWS_AS(log_map0(v2(1.2, 0.0), 1.0), std::domain_error);
}

TEST_CASE("clip to radius") {
    CHECK((clip_to_radius(v2(3.0, 4.0), 10.0) - v2(3.0, 4.0)).norm() == 0.0);
    const Vec c = clip_to_radius(v2(3.0, 4.0), 1.5);
    CHECK(c(0) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(c(1) == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(clip_to_radius(v2(0.0, 0.0), 1.0).norm() == 0.0);
}

TEST_CASE("distance gradient at the cusp is zero") {
    const Vec a = v2(0.3, -0.2);
    const PairGrad g = distance_grad(a, a, 1.0);
    CHECK(g.ga.norm() == 0.0);
    CHECK(g.gb.norm() == 0.0);
    CHECK(g.gc == 0.0);
}

TEST_CASE("analytic gradients agree with central differences") {
    Rng rng(7);
    double c = 0.4;
    Vec v = v2(0.5, 0.1);
    const Vec w = v2(0.3, -0.8);

    const MapGrad ge = exp_map0_vjp(v, c, w);
    for (int i = 0; i < 2; ++i) {
        const double num = central_diff(
            [&](double x) {
                Vec vv = v;
                vv(i) = x;
                return w.dot(exp_map0(vv, c));
            },
            v(i));
        CHECK(rel_err(ge.gx(i), num) < 1e-4);
    }
    const double numc = central_diff([&](double x) { return w.dot(exp_map0(v, x)); }, c);
    CHECK(rel_err(ge.gc, numc) < 1e-4);

    const Vec a = v2(0.2, -0.3);
    const Vec b = v2(-0.1, 0.4);
    const PairGrad gd = distance_grad(a, b, c);
    const double num_dc = central_diff([&](double x) { return distance(a, b, x); }, c);
    CHECK(rel_err(gd.gc, num_dc) < 1e-4);
}

TEST_CASE("identity and limit suites pass") {
    for (const CheckResult& r : run_inverse_map_checks(11)) {
        INFO(r.name, " worst=", r.worst_error, " tol=", r.tolerance);
        CHECK(r.pass);
    }
}

}  // TEST_SUITE
