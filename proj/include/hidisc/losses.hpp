#pragma once

#include <vector>

#include "hidisc/geometry.hpp"
#include "hidisc/prototypes.hpp"

namespace hidisc {

struct LossWeights {
    double lambda1 = 0.60;  // prototype alignment
    double lambda2 = 0.25;  // contrastive
    double lambda3 = 0.15;  // outlier repulsion
    void validate() const;  // nonnegative, sum to 1 within 1e-9
};

struct ContrastiveConfig {
    double temperature = 0.1;
    double alpha_max = 1.0;
    int total_epochs = 50;
    void validate() const;
};

// Fixed hinge margin for the outlier loss; computed once then frozen.
struct OutlierMargin {
    double gamma = 0.0;
    double quantile = 0.8;
    bool frozen = false;
};

// Linear schedule for the distance/angle balance: epoch * alpha_max / E.
double alpha_schedule(int epoch, double alpha_max, int total_epochs);

struct ScalarGrad {
    double value = 0.0;
    Vec gz;
    double gc = 0.0;
};

// Penalized alignment to an ideal prototype:
//   log(|z - p|^2 / (1 - c|z|^2)) + phi * log(1 - |z|^2).
// Throws std::domain_error when z touches the unit sphere or the ball
// boundary.
ScalarGrad busemann_loss(const Vec& z, const Vec& p, double c, double phi);

struct BatchGrad {
    double value = 0.0;
    std::vector<Vec> gz;
    double gc = 0.0;
};

// Mean of busemann_loss over a batch; proto_idx[i] selects the prototype row
// for sample i.
BatchGrad busemann_loss_batch(const std::vector<Vec>& zs, const std::vector<int>& proto_idx,
                              const PrototypeSet& ps, double c, double phi);

// alpha_d * (-distance) + (1 - alpha_d) * tangent-space cosine. Cosine with a
// zero tangent vector is 0.
double hybrid_similarity(const Vec& z1, const Vec& z2, double c, double alpha_d);

struct HybridGrad {
    double value = 0.0;
    Vec g1, g2;
    double gc = 0.0;
};
HybridGrad hybrid_similarity_grad(const Vec& z1, const Vec& z2, double c, double alpha_d);

struct ContrastiveGrad {
    double value = 0.0;
    std::vector<Vec> g_view1, g_view2;
    double gc = 0.0;
};

// View-pair InfoNCE over hybrid similarities. For anchor i the positive logit
// is delta(view2[i], view1[i])/tau and the negatives are delta(view1[i],
// view1[j])/tau for j != i; the positive term participates in the softmax
// normalizer. Mean over anchors. Requires B >= 2.
ContrastiveGrad contrastive_loss(const std::vector<Vec>& view1, const std::vector<Vec>& view2,
                                 double c, const ContrastiveConfig& cfg, int epoch);

// Ideal prototypes pulled just inside the ball, where the hinge distances are
// evaluated: (1 - eps)/sqrt(c) * p_k.
Vec pulled_prototype(const PrototypeSet& ps, int k, double c);

// Nearest-rank quantile: value at 1-based index ceil(q * n) of the ascending
// sort. q in (0,1); input must be nonempty.
double nearest_rank_quantile(std::vector<double> values, double q);

// Nearest-rank quantile of per-sample min distance to the pulled prototypes.
OutlierMargin compute_margin(const std::vector<Vec>& points, const PrototypeSet& ps, double c,
                             double quantile);

// Mean over mixed points of max(0, gamma - min_k distance(z, pulled p_k)).
// Empty input yields 0. Requires a frozen margin.
BatchGrad outlier_loss(const std::vector<Vec>& mixed, const PrototypeSet& ps, double c,
                       const OutlierMargin& margin);

double total_loss(double l_buse, double l_u, double l_out, const LossWeights& w);

namespace detail {
// Cosine with the zero-vector-is-0 convention, plus gradients.
double cosine(const Vec& u, const Vec& v);
void cosine_grad(const Vec& u, const Vec& v, double upstream, Vec& gu, Vec& gv);
}  // namespace detail

}  // namespace hidisc
