#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hidisc/dataset.hpp"
#include "hidisc/evaluation.hpp"
#include "hidisc/losses.hpp"
#include "hidisc/mixing.hpp"
#include "hidisc/model.hpp"
#include "hidisc/prototypes.hpp"

namespace hidisc {

struct TrainConfig {
    int epochs = 50;
    int batch_size = 128;
    LossWeights weights{0.60, 0.25, 0.15};
    double phi = 0.75;
    double clip_radius = 1.5;
    double margin_quantile = 0.8;
    double temperature = 0.1;
    double alpha_max = 1.0;
    double view_strength = 0.1;
    double view_mask_prob = 0.1;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-5;
    double curvature_init = 0.05;
    std::vector<int> hidden_dims{512, 128};
    int embed_dim = 32;
    std::uint64_t seed = 0;
    Space space = Space::hyperbolic;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double l_buse = 0.0;
    double l_u = 0.0;
    double l_out = 0.0;
    double total = 0.0;
    double curvature = 0.0;
    double alpha_d = 0.0;
    double lr = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> records;
    // One record per line, fixed field order; diffable.
    std::string to_text() const;
};

// Everything needed to embed and evaluate later; serializes to a versioned
// text checkpoint that round-trips bit-exactly.
struct TrainedModel {
    Space space = Space::hyperbolic;
    ProjectionHead head;
    double curvature = 0.05;
    double clip_radius = 1.5;
    PrototypeSet prototypes;
    OutlierMargin margin;
    OptimizerState opt;
    Rng rng;
    int epochs_trained = 0;

    Vec embed(const Vec& x) const;
    // Features for clustering: tangent-space coordinates in hyperbolic mode,
    // the embedding itself in euclidean mode.
    Eigen::MatrixXd embed_dataset(const FeatureDataset& data) const;

    void save(std::ostream& os) const;
    void save_file(const std::string& path) const;
    static TrainedModel load(std::istream& is);
    static TrainedModel load_file(const std::string& path);
};

struct TrainResult {
    TrainedModel model;
    TrainLog log;
};

// Full training loop: prototypes placed once, margin frozen on the first
// batch, per batch views -> embeddings -> mixed points -> three losses ->
// SGD step with curvature clamp. Deterministic given cfg.seed.
TrainResult train(const FeatureDataset& data, const TrainConfig& cfg);

// One batch of the objective with gradients for every head parameter and the
// curvature. Shared by the training loop and the finite-difference checks so
// both see the identical computation. `view1`/`view2` are raw feature views;
// `parents` are fixed mixing pairs; the margin must already be frozen.
struct StepParams {
    LossWeights weights;
    double phi = 0.75;
    double clip_radius = 1.5;
    double temperature = 0.1;
    double alpha_max = 1.0;
    int total_epochs = 50;
    int epoch = 0;
    Space space = Space::hyperbolic;
};

struct BatchLoss {
    double l_buse = 0.0;
    double l_u = 0.0;
    double l_out = 0.0;
    double total = 0.0;
    HeadGrads grads;
};

BatchLoss batch_loss_and_grads(const ProjectionHead& head, double curvature,
                               const std::vector<Vec>& view1, const std::vector<Vec>& view2,
                               const std::vector<int>& proto_idx, const PrototypeSet& ps,
                               const OutlierMargin& margin,
                               const std::vector<MixedBatch::Parent>& parents,
                               const StepParams& sp);

struct EvalOptions {
    int fixed_k = 0;  // 0 = estimate
    int k_max = 20;
    std::uint64_t seed = 0;
    KSearchMode k_mode = KSearchMode::brent;
};

struct EvalReport {
    double all_acc = 0.0;
    double old_acc = 0.0;
    double new_acc = 0.0;
    int estimated_k = 0;
    bool k_degenerate = false;
    double silhouette_score = 0.0;
    double icd = 0.0;
    double icv = 0.0;
    std::vector<std::pair<std::string, double>> per_class;  // sorted by label
    std::string to_text() const;  // fixed key order
};

// Test-time protocol: embed, estimate K (unless fixed), cluster with k-means,
// Hungarian-match against the true labels, report All/Old/New plus
// diagnostics.
EvalReport evaluate(const TrainedModel& model, const FeatureDataset& target,
                    const std::vector<std::string>& known_classes, const EvalOptions& opts);

}  // namespace hidisc
