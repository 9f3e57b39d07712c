#pragma once

#include <vector>

#include "hidisc/losses.hpp"

namespace hidisc {

// Flat-space analogues of the three training losses, used by the ablation
// mode. Prototypes are the class means of the supplied batch, so gradients
// flow through both the sample and mean sides.

struct ClassMeans {
    std::vector<Vec> means;            // one per class present in the batch
    std::vector<int> class_of_sample;  // index into `means` per sample
    std::vector<int> counts;
};

ClassMeans batch_class_means(const std::vector<Vec>& zs, const std::vector<int>& labels);

// -log softmax over logits -|z - mu_j|^2, mean over the batch.
BatchGrad euclidean_prototype_softmax(const std::vector<Vec>& zs, const std::vector<int>& labels);

// InfoNCE on l2-normalized embeddings with dot-product logits; same
// positive/negative layout as the hyperbolic contrastive loss.
ContrastiveGrad euclidean_contrastive(const std::vector<Vec>& view1, const std::vector<Vec>& view2,
                                      double tau);

// Hinge max(0, gamma - min_k |z_mix - mu_k|), mean over mixed points.
// g_means receives the gradient with respect to each class mean.
struct EuclideanOutlierGrad {
    double value = 0.0;
    std::vector<Vec> g_mixed;
    std::vector<Vec> g_means;
};
EuclideanOutlierGrad euclidean_outlier(const std::vector<Vec>& mixed,
                                       const std::vector<Vec>& means, const OutlierMargin& margin);

OutlierMargin euclidean_margin(const std::vector<Vec>& points, const std::vector<Vec>& means,
                               double quantile);

}  // namespace hidisc
