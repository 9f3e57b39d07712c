#pragma once

#include <Eigen/Core>
#include <istream>
#include <ostream>
#include <utility>
#include <vector>

#include "hidisc/geometry.hpp"
#include "hidisc/rng.hpp"

namespace hidisc {

enum class Space { hyperbolic, euclidean };

// Three affine layers with tanh between them; dims = [d_in, h1, h2, d_out].
struct ProjectionHead {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    static ProjectionHead init(const std::vector<int>& dims, Rng& rng);
    int input_dim() const { return static_cast<int>(weights.front().cols()); }
    int output_dim() const { return static_cast<int>(weights.back().rows()); }
    std::vector<int> dims() const;

    void save(std::ostream& os) const;
    static ProjectionHead load(std::istream& is);
};

// Gradient accumulator shaped like a ProjectionHead plus the curvature.
struct HeadGrads {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    double curvature = 0.0;

    static HeadGrads zeros_like(const ProjectionHead& head);
    bool all_finite() const;
};

// Intermediate activations for one sample, kept for the backward pass.
struct ForwardCache {
    Vec x;
    std::vector<Vec> pre;   // affine outputs a_l
    std::vector<Vec> post;  // activations after tanh (last layer raw)
    Vec clipped;            // after clip_to_radius
    Vec ball;               // after exp map (hyperbolic only)
};

Vec head_forward(const ProjectionHead& head, const Vec& x, ForwardCache* cache = nullptr);

// Full embedding: hyperbolic -> clip_to_ball(exp0(clip_r(mlp(x)), c), c);
// euclidean -> clip_r(mlp(x)).
Vec embed_feature(const ProjectionHead& head, const Vec& x, double clip_radius, double c,
                  Space space, ForwardCache* cache = nullptr);

// Backpropagates dL/dz through the embedding into `grads` (accumulating).
void embed_backward(const ProjectionHead& head, const ForwardCache& cache, const Vec& gz,
                    double clip_radius, double c, Space space, HeadGrads& grads);

// SGD with momentum, weight decay on the head only, cosine-annealed lr:
// lr(e) = 0.5 * lr0 * (1 + cos(pi * e / E)).
struct OptimizerState {
    double lr0 = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-5;
    int total_epochs = 50;
    std::vector<Eigen::MatrixXd> w_buf;
    std::vector<Eigen::VectorXd> b_buf;
    double c_buf = 0.0;

    static OptimizerState init(const ProjectionHead& head, double lr0, double momentum,
                               double weight_decay, int total_epochs);
    double lr(int epoch) const;

    void save(std::ostream& os) const;
    static OptimizerState load(std::istream& is);
};

// One optimizer step; curvature is clamped to its range afterwards. Throws
// NumericError on non-finite gradients so the caller can abort the batch.
void backward_and_step(ProjectionHead& head, double& curvature, const HeadGrads& grads,
                       OptimizerState& opt, int epoch);

// Two noisy views: x + strength * N(0, I) with coordinates zeroed with
// probability mask_prob. Deterministic given the rng stream.
std::pair<Vec, Vec> make_views(const Vec& x, double strength, double mask_prob, Rng& rng);

}  // namespace hidisc
