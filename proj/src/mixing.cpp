#include "hidisc/mixing.hpp"

#include "hidisc/errors.hpp"

namespace hidisc {

Vec tangent_cutmix(const Vec& zi, const Vec& zj, double lambda, double c) {
    const Vec vmix = lambda * log_map0(zi, c) + (1.0 - lambda) * log_map0(zj, c);
    return exp_map0(vmix, c);
}

CutmixGrad tangent_cutmix_vjp(const Vec& zi, const Vec& zj, double lambda, double c,
                              const Vec& w) {
    const Vec vi = log_map0(zi, c);
    const Vec vj = log_map0(zj, c);
    const Vec vmix = lambda * vi + (1.0 - lambda) * vj;
    const MapGrad outer = exp_map0_vjp(vmix, c, w);
    const MapGrad gi = log_map0_vjp(zi, c, lambda * outer.gx);
    const MapGrad gj = log_map0_vjp(zj, c, (1.0 - lambda) * outer.gx);
    CutmixGrad g;
    g.gi = gi.gx;
    g.gj = gj.gx;
    g.gc = outer.gc + gi.gc + gj.gc;
    return g;
}

std::vector<MixedBatch::Parent> sample_mix_parents(const std::vector<int>& labels, Rng& rng) {
    std::vector<MixedBatch::Parent> parents;
    const int n = static_cast<int>(labels.size());
    std::vector<int> partners;
    for (int i = 0; i < n; ++i) {
        partners.clear();
        for (int j = 0; j < n; ++j) {
            if (labels[j] != labels[i]) partners.push_back(j);
        }
        if (partners.empty()) continue;
        const int j = partners[rng.uniform_int(partners.size())];
        const double lambda = rng.uniform();
        parents.push_back({i, j, lambda});
    }
    return parents;
}

MixedBatch realize_mixed(const std::vector<Vec>& embeddings,
                         const std::vector<MixedBatch::Parent>& parents, double c) {
    MixedBatch out;
    out.parents = parents;
    out.points.reserve(parents.size());
    for (const auto& p : parents) {
        out.points.push_back(tangent_cutmix(embeddings[static_cast<std::size_t>(p.i)],
                                            embeddings[static_cast<std::size_t>(p.j)], p.lambda,
                                            c));
    }
    return out;
}

MixedBatch realize_mixed_euclidean(const std::vector<Vec>& embeddings,
                                   const std::vector<MixedBatch::Parent>& parents) {
    MixedBatch out;
    out.parents = parents;
    out.points.reserve(parents.size());
    for (const auto& p : parents) {
        out.points.push_back(p.lambda * embeddings[static_cast<std::size_t>(p.i)] +
                             (1.0 - p.lambda) * embeddings[static_cast<std::size_t>(p.j)]);
    }
    return out;
}

MixedBatch sample_mixed_batch(const std::vector<Vec>& embeddings, const std::vector<int>& labels,
                              double c, Rng& rng) {
    if (embeddings.size() != labels.size()) {
        throw ConfigError("sample_mixed_batch: label count mismatch");
    }
    return realize_mixed(embeddings, sample_mix_parents(labels, rng), c);
}

MixedBatch sample_mixed_batch_euclidean(const std::vector<Vec>& embeddings,
                                        const std::vector<int>& labels, Rng& rng) {
    if (embeddings.size() != labels.size()) {
        throw ConfigError("sample_mixed_batch: label count mismatch");
    }
    return realize_mixed_euclidean(embeddings, sample_mix_parents(labels, rng));
}

}  // namespace hidisc
