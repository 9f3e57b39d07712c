#include "hidisc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hidisc/errors.hpp"

namespace hidisc {

void LossWeights::validate() const {
    if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) {
        throw ConfigError("loss weights must be nonnegative");
    }
    if (std::abs(lambda1 + lambda2 + lambda3 - 1.0) > 1e-9) {
        throw ConfigError("loss weights must sum to 1");
    }
}

void ContrastiveConfig::validate() const {
    if (temperature <= 0.0) throw ConfigError("temperature must be positive");
    if (alpha_max < 0.0 || alpha_max > 1.0) throw ConfigError("alpha_max must lie in [0,1]");
    if (total_epochs <= 0) throw ConfigError("total_epochs must be positive");
}

double alpha_schedule(int epoch, double alpha_max, int total_epochs) {
    if (total_epochs <= 0) throw ConfigError("alpha_schedule: total_epochs must be positive");
    if (epoch < 0 || epoch > total_epochs) throw ConfigError("alpha_schedule: epoch out of range");
    return static_cast<double>(epoch) * alpha_max / static_cast<double>(total_epochs);
}

ScalarGrad busemann_loss(const Vec& z, const Vec& p, double c, double phi) {
    detail::require_finite(z, "busemann_loss");
    const double dist2 = (z - p).squaredNorm();
    const double zn2 = z.squaredNorm();
    const double ball_term = 1.0 - c * zn2;
    const double unit_term = 1.0 - zn2;
    if (ball_term <= 0.0 || unit_term <= 0.0 || dist2 <= 0.0) {
        throw std::domain_error("busemann_loss: embedding on or outside the boundary");
    }
    ScalarGrad out;
    out.value = std::log(dist2 / ball_term) + phi * std::log(unit_term);
    out.gz = 2.0 * (z - p) / dist2 + (2.0 * c / ball_term) * z - (2.0 * phi / unit_term) * z;
    out.gc = zn2 / ball_term;
    return out;
}

BatchGrad busemann_loss_batch(const std::vector<Vec>& zs, const std::vector<int>& proto_idx,
                              const PrototypeSet& ps, double c, double phi) {
    if (zs.empty()) throw DataError("busemann_loss_batch: empty batch");
    if (zs.size() != proto_idx.size()) {
        throw ConfigError("busemann_loss_batch: index count mismatch");
    }
    BatchGrad out;
    out.gz.resize(zs.size());
    const double inv = 1.0 / static_cast<double>(zs.size());
    for (std::size_t i = 0; i < zs.size(); ++i) {
        const ScalarGrad g = busemann_loss(zs[i], ps.row(proto_idx[i]), c, phi);
        out.value += inv * g.value;
        out.gz[i] = inv * g.gz;
        out.gc += inv * g.gc;
    }
    return out;
}

namespace detail {

double cosine(const Vec& u, const Vec& v) {
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return u.dot(v) / (nu * nv);
}

void cosine_grad(const Vec& u, const Vec& v, double upstream, Vec& gu, Vec& gv) {
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) return;
    const double cosuv = u.dot(v) / (nu * nv);
    gu += upstream * (v / (nu * nv) - cosuv * u / (nu * nu));
    gv += upstream * (u / (nu * nv) - cosuv * v / (nv * nv));
}

}  // namespace detail

double hybrid_similarity(const Vec& z1, const Vec& z2, double c, double alpha_d) {
    const double dist_part = -distance(z1, z2, c);
    const double cos_part = detail::cosine(log_map0(z1, c), log_map0(z2, c));
    return alpha_d * dist_part + (1.0 - alpha_d) * cos_part;
}

HybridGrad hybrid_similarity_grad(const Vec& z1, const Vec& z2, double c, double alpha_d) {
    HybridGrad out;
    out.g1 = Vec::Zero(z1.size());
    out.g2 = Vec::Zero(z2.size());

    const double dist = distance(z1, z2, c);
    const Vec u1 = log_map0(z1, c);
    const Vec u2 = log_map0(z2, c);
    const double cos_part = detail::cosine(u1, u2);
    out.value = -alpha_d * dist + (1.0 - alpha_d) * cos_part;

    if (alpha_d != 0.0) {
        const PairGrad dg = distance_grad(z1, z2, c);
        out.g1 -= alpha_d * dg.ga;
        out.g2 -= alpha_d * dg.gb;
        out.gc -= alpha_d * dg.gc;
    }
    if (alpha_d != 1.0) {
        Vec gu1 = Vec::Zero(u1.size());
        Vec gu2 = Vec::Zero(u2.size());
        detail::cosine_grad(u1, u2, 1.0 - alpha_d, gu1, gu2);
        const MapGrad m1 = log_map0_vjp(z1, c, gu1);
        const MapGrad m2 = log_map0_vjp(z2, c, gu2);
        out.g1 += m1.gx;
        out.g2 += m2.gx;
        out.gc += m1.gc + m2.gc;
    }
    return out;
}

ContrastiveGrad contrastive_loss(const std::vector<Vec>& view1, const std::vector<Vec>& view2,
                                 double c, const ContrastiveConfig& cfg, int epoch) {
    cfg.validate();
    const int b = static_cast<int>(view1.size());
    if (b < 2) throw ConfigError("contrastive_loss: need at least 2 samples in the batch");
    if (view2.size() != view1.size()) {
        throw ConfigError("contrastive_loss: view count mismatch");
    }
    const double alpha_d = alpha_schedule(epoch, cfg.alpha_max, cfg.total_epochs);
    const double tau = cfg.temperature;

    ContrastiveGrad out;
    out.g_view1.assign(view1.size(), Vec());
    out.g_view2.assign(view1.size(), Vec());
    for (int i = 0; i < b; ++i) {
        out.g_view1[i] = Vec::Zero(view1[i].size());
        out.g_view2[i] = Vec::Zero(view1[i].size());
    }

    const double inv_b = 1.0 / static_cast<double>(b);
    std::vector<double> neg_logits(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
        const double pos_logit = hybrid_similarity(view2[i], view1[i], c, alpha_d) / tau;
        double shift = pos_logit;
        for (int j = 0; j < b; ++j) {
            if (j == i) continue;
            neg_logits[j] = hybrid_similarity(view1[i], view1[j], c, alpha_d) / tau;
            shift = std::max(shift, neg_logits[j]);
        }
        double denom = std::exp(pos_logit - shift);
        for (int j = 0; j < b; ++j) {
            if (j != i) denom += std::exp(neg_logits[j] - shift);
        }
        out.value += inv_b * (-(pos_logit - shift) + std::log(denom));

        // d(-log softmax)/d logit: softmax prob minus the one-hot positive.
        const double dpos = inv_b * (std::exp(pos_logit - shift) / denom - 1.0);
        {
            const HybridGrad hg = hybrid_similarity_grad(view2[i], view1[i], c, alpha_d);
            out.g_view2[i] += (dpos / tau) * hg.g1;
            out.g_view1[i] += (dpos / tau) * hg.g2;
            out.gc += (dpos / tau) * hg.gc;
        }
        for (int j = 0; j < b; ++j) {
            if (j == i) continue;
            const double dneg = inv_b * (std::exp(neg_logits[j] - shift) / denom);
            const HybridGrad hg = hybrid_similarity_grad(view1[i], view1[j], c, alpha_d);
            out.g_view1[i] += (dneg / tau) * hg.g1;
            out.g_view1[j] += (dneg / tau) * hg.g2;
            out.gc += (dneg / tau) * hg.gc;
        }
    }
    return out;
}

Vec pulled_prototype(const PrototypeSet& ps, int k, double c) {
    return ((1.0 - kBallEps) / std::sqrt(c)) * ps.row(k);
}

double nearest_rank_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DataError("nearest_rank_quantile: empty input");
    if (q <= 0.0 || q >= 1.0) throw ConfigError("nearest_rank_quantile: q must lie in (0,1)");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return values[rank - 1];
}

OutlierMargin compute_margin(const std::vector<Vec>& points, const PrototypeSet& ps, double c,
                             double quantile) {
    if (points.empty()) throw DataError("compute_margin: empty point set");
    std::vector<double> min_dists;
    min_dists.reserve(points.size());
    for (const Vec& z : points) {
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k < ps.size(); ++k) {
            best = std::min(best, distance(z, pulled_prototype(ps, k, c), c));
        }
        min_dists.push_back(best);
    }
    OutlierMargin m;
    m.gamma = nearest_rank_quantile(std::move(min_dists), quantile);
    m.quantile = quantile;
    m.frozen = true;
    return m;
}

BatchGrad outlier_loss(const std::vector<Vec>& mixed, const PrototypeSet& ps, double c,
                       const OutlierMargin& margin) {
    if (!margin.frozen) throw ConfigError("outlier_loss: margin has not been frozen");
    BatchGrad out;
    if (mixed.empty()) return out;
    out.gz.resize(mixed.size());
    const double inv = 1.0 / static_cast<double>(mixed.size());
    const double dpull_dc = -0.5 * (1.0 - kBallEps) * std::pow(c, -1.5);
    for (std::size_t i = 0; i < mixed.size(); ++i) {
        out.gz[i] = Vec::Zero(mixed[i].size());
        double best = std::numeric_limits<double>::infinity();
        int best_k = 0;
        for (int k = 0; k < ps.size(); ++k) {
            const double d = distance(mixed[i], pulled_prototype(ps, k, c), c);
            if (d < best) {
                best = d;
                best_k = k;
            }
        }
        const double hinge = margin.gamma - best;
        if (hinge <= 0.0) continue;
        out.value += inv * hinge;
        const Vec pk = pulled_prototype(ps, best_k, c);
        const PairGrad dg = distance_grad(mixed[i], pk, c);
        out.gz[i] = -inv * dg.ga;
        // The pulled prototype itself moves with c.
        out.gc -= inv * (dg.gc + dg.gb.dot(ps.row(best_k)) * dpull_dc);
    }
    return out;
}

double total_loss(double l_buse, double l_u, double l_out, const LossWeights& w) {
    w.validate();
    return w.lambda1 * l_buse + w.lambda2 * l_u + w.lambda3 * l_out;
}

}  // namespace hidisc
