#pragma once

#include <vector>

#include "hidisc/geometry.hpp"
#include "hidisc/rng.hpp"

namespace hidisc {

// Pseudo-novel points synthesized from label-mismatched pairs. The points
// carry no class label and feed only the outlier loss.
struct MixedBatch {
    struct Parent {
        int i = 0;
        int j = 0;
        double lambda = 0.0;
    };
    std::vector<Vec> points;
    std::vector<Parent> parents;
    bool empty() const { return points.empty(); }
    std::size_t size() const { return points.size(); }
};

// exp0(lambda * log0(z_i) + (1 - lambda) * log0(z_j)).
Vec tangent_cutmix(const Vec& zi, const Vec& zj, double lambda, double c);

struct CutmixGrad {
    Vec gi, gj;
    double gc = 0.0;
};
CutmixGrad tangent_cutmix_vjp(const Vec& zi, const Vec& zj, double lambda, double c, const Vec& w);

// One mixed point per anchor that has at least one partner with a different
// label; the partner is chosen uniformly and lambda ~ Uniform(0,1). A
// single-label batch yields an empty MixedBatch.
MixedBatch sample_mixed_batch(const std::vector<Vec>& embeddings, const std::vector<int>& labels,
                              double c, Rng& rng);

// Flat-space variant for the ablation mode: lambda*z_i + (1-lambda)*z_j.
MixedBatch sample_mixed_batch_euclidean(const std::vector<Vec>& embeddings,
                                        const std::vector<int>& labels, Rng& rng);

// Pair sampling alone; depends only on labels and the rng stream.
std::vector<MixedBatch::Parent> sample_mix_parents(const std::vector<int>& labels, Rng& rng);

// Materialize mixed points for fixed parent pairs.
MixedBatch realize_mixed(const std::vector<Vec>& embeddings,
                         const std::vector<MixedBatch::Parent>& parents, double c);
MixedBatch realize_mixed_euclidean(const std::vector<Vec>& embeddings,
                                   const std::vector<MixedBatch::Parent>& parents);

}  // namespace hidisc
