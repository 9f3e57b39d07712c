#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hidisc/errors.hpp"
#include "hidisc/model.hpp"

using namespace hidisc;

TEST_SUITE("model") {

TEST_CASE("zero weights map everything to the origin") {
    Rng rng(1);
    ProjectionHead head = ProjectionHead::init({4, 6, 5, 3}, rng);
    for (auto& w : head.weights) w.setZero();
    for (auto& b : head.biases) b.setZero();
    Vec x(4);
    x << 1.0, -2.0, 0.5, 3.0;
    CHECK(embed_feature(head, x, 1.5, 0.05, Space::hyperbolic).norm() == 0.0);
    CHECK(embed_feature(head, x, 1.5, 0.05, Space::euclidean).norm() == 0.0);
}

TEST_CASE("a single active path composes affine, clip and exp map") {
    // One nonzero weight per layer so the network reduces to a scalar chain.
    Rng rng(2);
    ProjectionHead head = ProjectionHead::init({2, 2, 2, 2}, rng);
    for (auto& w : head.weights) w.setZero();
    for (auto& b : head.biases) b.setZero();
    head.weights[0](0, 0) = 2.0;
    head.weights[1](0, 0) = 1.0;
    head.weights[2](0, 0) = 0.5;
    Vec x(2);
    x << 0.3, 9.9;  // second coordinate is never read
    const double pre = 0.5 * std::tanh(std::tanh(2.0 * 0.3));
    const double c = 0.3;
    const Vec z = embed_feature(head, x, 1.5, c, Space::hyperbolic);
    const Vec expected = exp_map0(clip_to_radius((Vec(2) << pre, 0.0).finished(), 1.5), c);
    CHECK((z - expected).norm() < 1e-15);
}

TEST_CASE("pre-map vectors longer than the radius are clipped to it") {
    Rng rng(3);
    ProjectionHead head = ProjectionHead::init({3, 8, 8, 4}, rng);
    for (auto& b : head.biases) b.setConstant(2.0);  // pushes norms up
    Vec x(3);
    x << 1.0, 1.0, 1.0;
    ForwardCache cache;
    const double r = 0.7;
    embed_feature(head, x, r, 0.05, Space::hyperbolic, &cache);
    REQUIRE(cache.post.back().norm() > r);  // raw output exceeds the radius
    CHECK(cache.clipped.norm() == doctest::Approx(r).epsilon(1e-12));
}

TEST_CASE("sgd step and curvature clamp") {
    Rng rng(4);
    ProjectionHead head = ProjectionHead::init({2, 3, 3, 2}, rng);
    OptimizerState opt = OptimizerState::init(head, 0.1, 0.0, 0.0, 10);
    double c = 0.05;

    HeadGrads zero = HeadGrads::zeros_like(head);
    const Eigen::MatrixXd w0 = head.weights[0];
    backward_and_step(head, c, zero, opt, 0);
    CHECK(head.weights[0] == w0);
    CHECK(c == doctest::Approx(0.05));

    HeadGrads g = HeadGrads::zeros_like(head);
    g.weights[0](1, 1) = 2.0;
    backward_and_step(head, c, g, opt, 0);
    CHECK(head.weights[0](1, 1) == doctest::Approx(w0(1, 1) - 0.1 * 2.0).epsilon(1e-12));

    // A huge positive curvature gradient drives c to the lower clamp.
    HeadGrads gc = HeadGrads::zeros_like(head);
    gc.curvature = 1e6;
    backward_and_step(head, c, gc, opt, 0);
    CHECK(c == doctest::Approx(kCurvatureMin));

    gc.curvature = -1e9;
    backward_and_step(head, c, gc, opt, 0);
    CHECK(c == doctest::Approx(kCurvatureMax));

    HeadGrads bad = HeadGrads::zeros_like(head);
    bad.curvature = std::nan("");
    CHECK_THROWS_AS(backward_and_step(head, c, bad, opt, 0), NumericError);
}

TEST_CASE("cosine schedule endpoints") {
    Rng rng(5);
    const ProjectionHead head = ProjectionHead::init({2, 3, 3, 2}, rng);
    const OptimizerState opt = OptimizerState::init(head, 0.01, 0.9, 5e-5, 50);
    CHECK(opt.lr(0) == 0.01);
    CHECK(opt.lr(50) < 1e-12);
    CHECK(opt.lr(25) == doctest::Approx(0.005));
}

TEST_CASE("curvature stays in range under arbitrary updates") {
    Rng rng(6);
    ProjectionHead head = ProjectionHead::init({2, 3, 3, 2}, rng);
    OptimizerState opt = OptimizerState::init(head, 0.5, 0.9, 0.0, 100);
    double c = 0.05;
    for (int t = 0; t < 200; ++t) {
        HeadGrads g = HeadGrads::zeros_like(head);
        g.curvature = 100.0 * rng.normal();
        backward_and_step(head, c, g, opt, t % 100);
        CHECK(c >= kCurvatureMin);
        CHECK(c <= kCurvatureMax);
    }
}

TEST_CASE("views are deterministic and unperturbed at zero strength") {
    Vec x(5);
    x << 1, 2, 3, 4, 5;
    {
        Rng rng(7);
        const auto [a, b] = make_views(x, 0.0, 0.0, rng);
        CHECK((a - x).norm() == 0.0);
        CHECK((b - x).norm() == 0.0);
    }
    {
        Rng r1(8), r2(8);
        const auto [a1, b1] = make_views(x, 0.3, 0.1, r1);
        const auto [a2, b2] = make_views(x, 0.3, 0.1, r2);
        CHECK((a1 - a2).norm() == 0.0);
        CHECK((b1 - b2).norm() == 0.0);
    }
}

TEST_CASE("view perturbation norm follows the chi mean") {
    const int d = 64;
    Vec x = Vec::Zero(d);
    Rng rng(9);
    double acc = 0.0;
    const int draws = 5000;  // two views per call
    for (int t = 0; t < draws; ++t) {
        const auto [a, b] = make_views(x, 0.1, 0.0, rng);
        acc += a.norm() + b.norm();
    }
    const double mean = acc / (2.0 * draws);
    const double expected = 0.1 * std::sqrt(static_cast<double>(d));
    CHECK(std::abs(mean - expected) / expected < 0.05);
}

TEST_CASE("head rejects mismatched input dimensions") {
    Rng rng(10);
    const ProjectionHead head = ProjectionHead::init({4, 5, 5, 3}, rng);
    Vec x(3);
    x.setZero();
    CHECK_THROWS_AS(head_forward(head, x), DataError);
}

TEST_CASE("head state round-trips through the text format") {
    Rng rng(11);
    const ProjectionHead head = ProjectionHead::init({3, 4, 4, 2}, rng);
    std::ostringstream os;
    head.save(os);
    std::istringstream is(os.str());
    const ProjectionHead back = ProjectionHead::load(is);
    for (std::size_t l = 0; l < head.weights.size(); ++l) {
        CHECK(head.weights[l] == back.weights[l]);
        CHECK(head.biases[l] == back.biases[l]);
    }
}

}  // TEST_SUITE
