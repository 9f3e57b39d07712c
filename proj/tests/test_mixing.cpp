#include <doctest.h>

#include "hidisc/mixing.hpp"
#include "hidisc/rng.hpp"

using namespace hidisc;

namespace {

Vec v2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}

}  // namespace

TEST_SUITE("mixing") {

TEST_CASE("endpoints return the parents") {
    const Vec zi = v2(0.31, -0.12);
    const Vec zj = v2(-0.05, 0.4);
    CHECK((tangent_cutmix(zi, zj, 1.0, 0.7) - zi).norm() < 1e-9);
    CHECK((tangent_cutmix(zi, zj, 0.0, 0.7) - zj).norm() < 1e-9);
}

TEST_CASE("symmetric mix of antipodal points is the origin") {
    CHECK(tangent_cutmix(v2(0.4, 0.0), v2(-0.4, 0.0), 0.5, 1.0).norm() < 1e-12);
}

TEST_CASE("mix equals the composed map oracle") {
    const Vec zi = v2(0.3, 0.0);
    const Vec zj = v2(0.0, 0.3);
    const double c = 0.05, lambda = 0.25;
    const Vec expected =
        exp_map0(lambda * log_map0(zi, c) + (1.0 - lambda) * log_map0(zj, c), c);
    CHECK((tangent_cutmix(zi, zj, lambda, c) - expected).norm() == 0.0);
    // Tangent-space linearity.
    const Vec mixed = tangent_cutmix(zi, zj, lambda, c);
    const Vec lin = lambda * log_map0(zi, c) + (1.0 - lambda) * log_map0(zj, c);
    CHECK((log_map0(mixed, c) - lin).norm() < 1e-6);
}

TEST_CASE("single-label batches produce no mixes") {
    Rng rng(3);
    const std::vector<Vec> embeddings{v2(0.1, 0.0), v2(0.0, 0.1)};
    const std::vector<int> labels{4, 4};
    CHECK(sample_mixed_batch(embeddings, labels, 1.0, rng).empty());
}

TEST_CASE("two samples with distinct labels yield two mixes") {
    Rng rng(3);
    const std::vector<Vec> embeddings{v2(0.1, 0.0), v2(0.0, 0.1)};
    const std::vector<int> labels{0, 1};
    const MixedBatch mb = sample_mixed_batch(embeddings, labels, 1.0, rng);
    CHECK(mb.size() == 2);
    CHECK(mb.parents[0].i == 0);
    CHECK(mb.parents[0].j == 1);
    CHECK(mb.parents[1].i == 1);
    CHECK(mb.parents[1].j == 0);
}

TEST_CASE("mixing is deterministic given the seed") {
    const std::vector<Vec> embeddings{v2(0.1, 0.0), v2(0.0, 0.1), v2(-0.2, 0.1), v2(0.15, 0.22)};
    const std::vector<int> labels{0, 1, 0, 2};
    Rng r1(99), r2(99);
    const MixedBatch a = sample_mixed_batch(embeddings, labels, 0.5, r1);
    const MixedBatch b = sample_mixed_batch(embeddings, labels, 0.5, r2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.parents[i].i == b.parents[i].i);
        CHECK(a.parents[i].j == b.parents[i].j);
        CHECK(a.parents[i].lambda == b.parents[i].lambda);
        CHECK((a.points[i] - b.points[i]).norm() == 0.0);
    }
}

TEST_CASE("no parent pair shares a label") {
    Rng rng(11);
    std::vector<Vec> embeddings;
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
        embeddings.push_back(v2(0.3 * rng.normal(), 0.3 * rng.normal()) * 0.4);
        labels.push_back(static_cast<int>(rng.uniform_int(5)));
    }
    const MixedBatch mb = sample_mixed_batch(embeddings, labels, 0.8, rng);
    for (const auto& p : mb.parents) {
        CHECK(labels[static_cast<std::size_t>(p.i)] != labels[static_cast<std::size_t>(p.j)]);
        CHECK(p.lambda >= 0.0);
        CHECK(p.lambda <= 1.0);
    }
}

}  // TEST_SUITE
