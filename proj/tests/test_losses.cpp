#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hidisc/errors.hpp"
#include "hidisc/euclidean.hpp"
#include "hidisc/gradcheck.hpp"
#include "hidisc/losses.hpp"
#include "hidisc/rng.hpp"

using namespace hidisc;

namespace {

Vec v2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}

Vec unit(double x, double y) {
    Vec v = v2(x, y);
    return v / v.norm();
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("busemann loss at the origin is zero") {
    const Vec p = unit(1.0, 2.0);
    const ScalarGrad g = busemann_loss(v2(0.0, 0.0), p, 0.3, 0.5);
    CHECK(g.value == doctest::Approx(0.0));
}

TEST_CASE("busemann loss matches the scalar oracle") {
    const Vec p = unit(0.0, 1.0);
    const Vec z = 0.5 * p;
    const double c = 0.05, phi = 0.75;
    const double expected = std::log(0.25 / (1.0 - 0.05 * 0.25)) + 0.75 * std::log(0.75);
    CHECK(expected == doctest::Approx(-1.5896).epsilon(1e-4));
    CHECK(busemann_loss(z, p, c, phi).value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("busemann gradient matches central differences") {
    const Vec p = unit(3.0, -1.0);
    Vec z = 0.3 * p + v2(0.05, 0.1);
    double c = 0.05;
    const ScalarGrad g = busemann_loss(z, p, c, 0.75);
    for (int i = 0; i < 2; ++i) {
        const double num = central_diff(
            [&](double x) {
                Vec zz = z;
                zz(i) = x;
                return busemann_loss(zz, p, c, 0.75).value;
            },
            z(i));
        CHECK(rel_err(g.gz(i), num) < 1e-4);
    }
    const double numc =
        central_diff([&](double x) { return busemann_loss(z, p, x, 0.75).value; }, c);
    CHECK(rel_err(g.gc, numc) < 1e-4);
}

TEST_CASE("busemann loss decreases along the ray toward the prototype") {
    const Vec p = unit(1.0, 1.0);
    for (double c : {0.05, 0.5, 1.0}) {
        for (double phi : {0.1, 0.75}) {
            double prev = busemann_loss(0.01 * p, p, c, phi).value;
            for (double t = 0.05; t <= 0.9; t += 0.05) {
                const double cur = busemann_loss(t * p, p, c, phi).value;
                CHECK(cur < prev);
                prev = cur;
            }
        }
    }
}

TEST_CASE("busemann loss rejects boundary points") {
    const Vec p = unit(1.0, 0.0);
    CHECK_THROWS_AS(busemann_loss(p, p, 0.5, 0.5), std::domain_error);
}

TEST_CASE("hybrid similarity endpoints and midpoint") {
    const Vec z1 = v2(0.3, 0.1);
    const Vec z2 = v2(-0.2, 0.25);
    const double c = 0.8;
    const double d = distance(z1, z2, c);
    const double cos_t = detail::cosine(log_map0(z1, c), log_map0(z2, c));
    CHECK(hybrid_similarity(z1, z2, c, 0.0) == doctest::Approx(cos_t));
    CHECK(hybrid_similarity(z1, z2, c, 1.0) == doctest::Approx(-d));
    CHECK(hybrid_similarity(z1, z2, c, 0.5) == doctest::Approx(0.5 * (-d) + 0.5 * cos_t));
    // -0.1 arithmetic: distance 1 and cosine 0.8 mixed at 1/2.
    CHECK(0.5 * (-1.0) + 0.5 * 0.8 == doctest::Approx(-0.1));
    // Zero tangent vector: cosine term is 0.
    CHECK(hybrid_similarity(v2(0.0, 0.0), z2, c, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("contrastive loss on identical embeddings is log 2") {
    ContrastiveConfig cfg;
    cfg.temperature = 0.2;
    cfg.alpha_max = 1.0;
    cfg.total_epochs = 50;
    const Vec z = v2(0.2, 0.1);
    const std::vector<Vec> view1{z, z}, view2{z, z};
    const ContrastiveGrad g = contrastive_loss(view1, view2, 1.0, cfg, 10);
    CHECK(g.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("contrastive loss saturates with one distant negative") {
    ContrastiveConfig cfg;
    cfg.temperature = 0.1;
    cfg.alpha_max = 1.0;
    cfg.total_epochs = 50;
    // alpha_d = 1 at the last epoch: pure distance similarity. The positive
    // pair coincides (delta 0) and the negative sits 20*tau away.
    const double c = 1.0;
    const Vec anchor = v2(0.0, 0.0);
    const double target = 20.0 * cfg.temperature;
    const Vec far_neg = v2(std::tanh(std::sqrt(c) * target / 2.0), 0.0);
    CHECK(distance(anchor, far_neg, c) == doctest::Approx(target).epsilon(1e-12));
    const std::vector<Vec> view1{anchor, far_neg}, view2{anchor, far_neg};
    const ContrastiveGrad g = contrastive_loss(view1, view2, c, cfg, 50);
    // Each anchor sees one negative at logit gap 20.
    CHECK(g.value < 1e-8);
    CHECK(g.value == doctest::Approx(std::log(1.0 + std::exp(-20.0))).epsilon(1e-6));
}

TEST_CASE("contrastive loss is invariant under batch permutation") {
    ContrastiveConfig cfg;
    cfg.temperature = 0.3;
    cfg.alpha_max = 0.7;
    cfg.total_epochs = 50;
    Rng rng(19);
    std::vector<Vec> v1, v2s;
    for (int i = 0; i < 5; ++i) {
        v1.push_back(v2(0.3 * rng.normal(), 0.3 * rng.normal()) * 0.3);
        v2s.push_back(v2(0.3 * rng.normal(), 0.3 * rng.normal()) * 0.3);
    }
    const double base = contrastive_loss(v1, v2s, 0.7, cfg, 20).value;
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    std::vector<Vec> p1, p2;
    for (std::size_t i : perm) {
        p1.push_back(v1[i]);
        p2.push_back(v2s[i]);
    }
    CHECK(contrastive_loss(p1, p2, 0.7, cfg, 20).value == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("contrastive loss requires two samples") {
    ContrastiveConfig cfg;
    const std::vector<Vec> one{v2(0.1, 0.0)};
    CHECK_THROWS_AS(contrastive_loss(one, one, 1.0, cfg, 0), ConfigError);
}

TEST_CASE("nearest-rank quantile matches the sort oracle") {
    CHECK(nearest_rank_quantile({10, 1, 3, 2, 9, 4, 6, 5, 8, 7}, 0.8) == doctest::Approx(8.0));
    CHECK(nearest_rank_quantile({3.7}, 0.5) == doctest::Approx(3.7));
    CHECK(nearest_rank_quantile({2.5, 2.5, 2.5}, 0.8) == doctest::Approx(2.5));
    CHECK_THROWS_AS(nearest_rank_quantile({}, 0.8), DataError);
}

TEST_CASE("compute_margin equals the brute-force oracle") {
    const PrototypeSet ps = place_prototypes(3, 4, 77);
    Rng rng(5);
    std::vector<Vec> pts;
    for (int i = 0; i < 23; ++i) {
        Vec z(4);
        for (int j = 0; j < 4; ++j) z(j) = 0.2 * rng.normal();
        pts.push_back(z);
    }
    const double c = 0.4;
    const OutlierMargin m = compute_margin(pts, ps, c, 0.8);
    CHECK(m.frozen);

    std::vector<double> mins;
    for (const Vec& z : pts) {
        double best = 1e300;
        for (int k = 0; k < ps.size(); ++k) {
            best = std::min(best, distance(z, pulled_prototype(ps, k, c), c));
        }
        mins.push_back(best);
    }
    std::sort(mins.begin(), mins.end());
    CHECK(m.gamma == doctest::Approx(mins[static_cast<std::size_t>(
                         std::ceil(0.8 * static_cast<double>(mins.size()))) - 1]));
}

TEST_CASE("outlier loss hinge behavior") {
    const PrototypeSet ps = place_prototypes(2, 2, 1);
    const double c = 1.0;
    OutlierMargin margin;
    margin.quantile = 0.8;
    margin.frozen = true;

    const Vec z = v2(0.05, 0.02);
    double dmin = 1e300;
    for (int k = 0; k < ps.size(); ++k) {
        dmin = std::min(dmin, distance(z, pulled_prototype(ps, k, c), c));
    }

    margin.gamma = dmin - 0.5;  // inactive
    CHECK(outlier_loss({z}, ps, c, margin).value == doctest::Approx(0.0));

    margin.gamma = dmin + 0.8;  // active
    CHECK(outlier_loss({z}, ps, c, margin).value == doctest::Approx(0.8).epsilon(1e-9));

    CHECK(outlier_loss({}, ps, c, margin).value == doctest::Approx(0.0));

    OutlierMargin unfrozen;
    CHECK_THROWS_AS(outlier_loss({z}, ps, c, unfrozen), ConfigError);
}

TEST_CASE("outlier loss is nonincreasing in the prototype distance") {
    const PrototypeSet ps = place_prototypes(2, 2, 2);
    const double c = 0.5;
    OutlierMargin margin;
    margin.gamma = 2.0;
    margin.frozen = true;
    // The hinge is a nonincreasing function of the min prototype distance and
    // exactly 0 once that distance reaches the margin.
    Rng rng(31);
    std::vector<std::pair<double, double>> pts;  // (dmin, loss)
    for (int t = 0; t < 60; ++t) {
        Vec z(2);
        z << 0.6 * rng.normal(), 0.6 * rng.normal();
        if (z.norm() > 1.3) z *= 1.3 / z.norm();
        double dmin = 1e300;
        for (int k = 0; k < ps.size(); ++k) {
            dmin = std::min(dmin, distance(z, pulled_prototype(ps, k, c), c));
        }
        const double loss = outlier_loss({z}, ps, c, margin).value;
        CHECK(loss == doctest::Approx(std::max(0.0, margin.gamma - dmin)).epsilon(1e-12));
        if (dmin >= margin.gamma) CHECK(loss == 0.0);
        pts.emplace_back(dmin, loss);
    }
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 1; i < pts.size(); ++i) {
        CHECK(pts[i].second <= pts[i - 1].second + 1e-12);
    }
}

TEST_CASE("total loss is the stated convex combination") {
    const LossWeights w{0.60, 0.25, 0.15};
    CHECK(total_loss(1.0, 1.0, 1.0, w) == doctest::Approx(1.0));
    CHECK(total_loss(2.0, 0.0, 0.0, w) == doctest::Approx(1.2));
    // Linearity in each slot.
    const double base = total_loss(0.3, -0.7, 2.0, w);
    CHECK(total_loss(0.3 + 1.0, -0.7, 2.0, w) == doctest::Approx(base + 0.60));
    CHECK(total_loss(0.3, -0.7 + 1.0, 2.0, w) == doctest::Approx(base + 0.25));
    CHECK(total_loss(0.3, -0.7, 2.0 + 1.0, w) == doctest::Approx(base + 0.15));

    LossWeights bad{0.5, 0.2, 0.2};
    CHECK_THROWS_AS(total_loss(1, 1, 1, bad), ConfigError);
    const LossWeights defaults{};
    CHECK(defaults.lambda1 == doctest::Approx(0.60));
    CHECK(defaults.lambda2 == doctest::Approx(0.25));
    CHECK(defaults.lambda3 == doctest::Approx(0.15));
}

TEST_CASE("alpha schedule endpoints") {
    CHECK(alpha_schedule(0, 1.0, 50) == doctest::Approx(0.0));
    CHECK(alpha_schedule(25, 1.0, 50) == doctest::Approx(0.5));
    CHECK(alpha_schedule(50, 1.0, 50) == doctest::Approx(1.0));
    CHECK(alpha_schedule(30, 0.4, 60) == doctest::Approx(0.2));
}

TEST_CASE("euclidean prototype softmax oracle") {
    // Three classes at an equilateral triangle: every sample sits on its
    // class mean and sees two other means at equal squared distance.
    const double side = 1.3;
    std::vector<Vec> mus{v2(0.0, 0.0), v2(side, 0.0), v2(side / 2.0, side * std::sqrt(3.0) / 2.0)};
    std::vector<Vec> zs;
    std::vector<int> labels;
    for (int k = 0; k < 3; ++k) {
        zs.push_back(mus[static_cast<std::size_t>(k)]);
        zs.push_back(mus[static_cast<std::size_t>(k)]);
        labels.push_back(k);
        labels.push_back(k);
    }
    const double delta = side * side;
    const double expected = -std::log(1.0 / (1.0 + 2.0 * std::exp(-delta)));
    CHECK(euclidean_prototype_softmax(zs, labels).value ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("euclidean contrastive oracle") {
    // Identical positive pair and one orthogonal negative at tau = 1.
    const std::vector<Vec> view1{v2(2.0, 0.0), v2(0.0, 3.0)};
    const std::vector<Vec> view2{v2(1.0, 0.0), v2(0.0, 1.0)};
    const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
    CHECK(euclidean_contrastive(view1, view2, 1.0).value ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("euclidean outlier hinge") {
    const std::vector<Vec> means{v2(0.0, 0.0), v2(2.0, 0.0)};
    OutlierMargin margin;
    margin.gamma = 0.5;
    margin.frozen = true;
    // Min distance 1.0 > margin: inactive.
    CHECK(euclidean_outlier({v2(1.0, 0.0)}, means, margin).value == doctest::Approx(0.0));
    margin.gamma = 1.5;
    CHECK(euclidean_outlier({v2(1.0, 0.0)}, means, margin).value == doctest::Approx(0.5));
}

TEST_CASE("gradient suites pass") {
    for (const CheckResult& r : run_gradient_checks(13)) {
        INFO(r.name, " worst=", r.worst_error, " tol=", r.tolerance);
        CHECK(r.pass);
    }
}

}  // TEST_SUITE
