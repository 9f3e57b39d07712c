#include "hidisc/euclidean.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hidisc/errors.hpp"

namespace hidisc {

ClassMeans batch_class_means(const std::vector<Vec>& zs, const std::vector<int>& labels) {
    if (zs.empty()) throw DataError("batch_class_means: empty batch");
    if (zs.size() != labels.size()) throw ConfigError("batch_class_means: label count mismatch");
    std::vector<int> uniq(labels);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

    ClassMeans cm;
    cm.means.assign(uniq.size(), Vec::Zero(zs[0].size()));
    cm.counts.assign(uniq.size(), 0);
    cm.class_of_sample.resize(zs.size());
    for (std::size_t i = 0; i < zs.size(); ++i) {
        const auto it = std::lower_bound(uniq.begin(), uniq.end(), labels[i]);
        const int k = static_cast<int>(it - uniq.begin());
        cm.class_of_sample[i] = k;
        cm.means[k] += zs[i];
        cm.counts[k] += 1;
    }
    for (std::size_t k = 0; k < cm.means.size(); ++k) {
        cm.means[k] /= static_cast<double>(cm.counts[k]);
    }
    return cm;
}

BatchGrad euclidean_prototype_softmax(const std::vector<Vec>& zs, const std::vector<int>& labels) {
    const ClassMeans cm = batch_class_means(zs, labels);
    const int n = static_cast<int>(zs.size());
    const int kc = static_cast<int>(cm.means.size());
    if (kc < 2) throw ConfigError("euclidean_prototype_softmax: need at least 2 classes in batch");

    BatchGrad out;
    out.gz.assign(zs.size(), Vec::Zero(zs[0].size()));
    const double inv = 1.0 / static_cast<double>(n);

    // q[i][j] = softmax prob minus one-hot; A_j accumulates the mean-side term.
    std::vector<Vec> mean_acc(cm.means.size(), Vec::Zero(zs[0].size()));
    std::vector<double> logits(static_cast<std::size_t>(kc));
    for (int i = 0; i < n; ++i) {
        double shift = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < kc; ++j) {
            logits[j] = -(zs[i] - cm.means[j]).squaredNorm();
            shift = std::max(shift, logits[j]);
        }
        double denom = 0.0;
        for (int j = 0; j < kc; ++j) denom += std::exp(logits[j] - shift);
        const int y = cm.class_of_sample[i];
        out.value += inv * (-(logits[y] - shift) + std::log(denom));
        for (int j = 0; j < kc; ++j) {
            const double q = std::exp(logits[j] - shift) / denom - (j == y ? 1.0 : 0.0);
            // d logit / d z_i = -2 (z_i - mu_j); d logit / d mu_j = 2 (z_i - mu_j).
            out.gz[i] += inv * q * (-2.0) * (zs[i] - cm.means[j]);
            mean_acc[j] += inv * q * 2.0 * (zs[i] - cm.means[j]);
        }
    }
    // Means are functions of the batch: d mu_j / d z_i = 1[y_i = j] / N_j.
    for (int i = 0; i < n; ++i) {
        const int y = cm.class_of_sample[i];
        out.gz[i] += mean_acc[y] / static_cast<double>(cm.counts[y]);
    }
    return out;
}

namespace {

Vec normalized_or_zero(const Vec& z) {
    const double n = z.norm();
    if (n == 0.0) return Vec::Zero(z.size());
    return z / n;
}

// VJP of z -> z/|z|.
Vec normalize_vjp(const Vec& z, const Vec& w) {
    const double n = z.norm();
    if (n == 0.0) return Vec::Zero(z.size());
    const Vec zhat = z / n;
    return (w - zhat.dot(w) * zhat) / n;
}

}  // namespace

ContrastiveGrad euclidean_contrastive(const std::vector<Vec>& view1, const std::vector<Vec>& view2,
                                      double tau) {
    const int b = static_cast<int>(view1.size());
    if (b < 2) throw ConfigError("euclidean_contrastive: need at least 2 samples in the batch");
    if (view2.size() != view1.size()) throw ConfigError("euclidean_contrastive: view count mismatch");
    if (tau <= 0.0) throw ConfigError("euclidean_contrastive: temperature must be positive");

    std::vector<Vec> n1(view1.size()), n2(view2.size());
    for (int i = 0; i < b; ++i) {
        n1[i] = normalized_or_zero(view1[i]);
        n2[i] = normalized_or_zero(view2[i]);
    }

    ContrastiveGrad out;
    out.g_view1.assign(view1.size(), Vec::Zero(view1[0].size()));
    out.g_view2.assign(view1.size(), Vec::Zero(view1[0].size()));
    const double inv_b = 1.0 / static_cast<double>(b);

    std::vector<Vec> gn1(view1.size(), Vec::Zero(view1[0].size()));
    std::vector<Vec> gn2(view2.size(), Vec::Zero(view1[0].size()));
    std::vector<double> neg(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
        const double pos = n2[i].dot(n1[i]) / tau;
        double shift = pos;
        for (int j = 0; j < b; ++j) {
            if (j == i) continue;
            neg[j] = n1[i].dot(n1[j]) / tau;
            shift = std::max(shift, neg[j]);
        }
        double denom = std::exp(pos - shift);
        for (int j = 0; j < b; ++j) {
            if (j != i) denom += std::exp(neg[j] - shift);
        }
        out.value += inv_b * (-(pos - shift) + std::log(denom));

        const double dpos = inv_b * (std::exp(pos - shift) / denom - 1.0) / tau;
        gn2[i] += dpos * n1[i];
        gn1[i] += dpos * n2[i];
        for (int j = 0; j < b; ++j) {
            if (j == i) continue;
            const double dneg = inv_b * (std::exp(neg[j] - shift) / denom) / tau;
            gn1[i] += dneg * n1[j];
            gn1[j] += dneg * n1[i];
        }
    }
    for (int i = 0; i < b; ++i) {
        out.g_view1[i] = normalize_vjp(view1[i], gn1[i]);
        out.g_view2[i] = normalize_vjp(view2[i], gn2[i]);
    }
    return out;
}

OutlierMargin euclidean_margin(const std::vector<Vec>& points, const std::vector<Vec>& means,
                               double quantile) {
    if (points.empty()) throw DataError("euclidean_margin: empty point set");
    if (means.empty()) throw ConfigError("euclidean_margin: no class means");
    std::vector<double> min_dists;
    min_dists.reserve(points.size());
    for (const Vec& z : points) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec& mu : means) best = std::min(best, (z - mu).norm());
        min_dists.push_back(best);
    }
    OutlierMargin m;
    m.gamma = nearest_rank_quantile(std::move(min_dists), quantile);
    m.quantile = quantile;
    m.frozen = true;
    return m;
}

EuclideanOutlierGrad euclidean_outlier(const std::vector<Vec>& mixed,
                                       const std::vector<Vec>& means,
                                       const OutlierMargin& margin) {
    if (!margin.frozen) throw ConfigError("euclidean_outlier: margin has not been frozen");
    EuclideanOutlierGrad out;
    out.g_means.assign(means.size(), means.empty() ? Vec() : Vec::Zero(means[0].size()));
    if (mixed.empty()) return out;
    out.g_mixed.assign(mixed.size(), Vec::Zero(mixed[0].size()));
    const double inv = 1.0 / static_cast<double>(mixed.size());
    for (std::size_t i = 0; i < mixed.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_k = 0;
        for (std::size_t k = 0; k < means.size(); ++k) {
            const double d = (mixed[i] - means[k]).norm();
            if (d < best) {
                best = d;
                best_k = k;
            }
        }
        const double hinge = margin.gamma - best;
        if (hinge <= 0.0) continue;
        out.value += inv * hinge;
        if (best > 0.0) {
            const Vec dir = (mixed[i] - means[best_k]) / best;
            out.g_mixed[i] -= inv * dir;
            out.g_means[best_k] += inv * dir;
        }
    }
    return out;
}

}  // namespace hidisc
