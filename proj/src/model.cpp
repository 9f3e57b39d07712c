#include "hidisc/model.hpp"

#include <cmath>

#include "hidisc/errors.hpp"
#include "hidisc/io.hpp"

namespace hidisc {

ProjectionHead ProjectionHead::init(const std::vector<int>& dims, Rng& rng) {
    if (dims.size() != 4) throw ConfigError("ProjectionHead: exactly 3 layers required");
    for (int d : dims) {
        if (d < 1) throw ConfigError("ProjectionHead: all layer dims must be positive");
    }
    ProjectionHead head;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int i = 0; i < fan_out; ++i) {
            for (int j = 0; j < fan_in; ++j) w(i, j) = rng.uniform(-bound, bound);
        }
        head.weights.push_back(std::move(w));
        head.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return head;
}

std::vector<int> ProjectionHead::dims() const {
    std::vector<int> d;
    d.push_back(static_cast<int>(weights.front().cols()));
    for (const auto& w : weights) d.push_back(static_cast<int>(w.rows()));
    return d;
}

void ProjectionHead::save(std::ostream& os) const {
    os << "layers " << weights.size() << '\n';
    for (std::size_t l = 0; l < weights.size(); ++l) {
        write_matrix(os, weights[l]);
        write_vector(os, biases[l]);
    }
}

ProjectionHead ProjectionHead::load(std::istream& is) {
    std::string tag;
    std::size_t layers = 0;
    if (!(is >> tag >> layers) || tag != "layers") {
        throw DataError("ProjectionHead: malformed checkpoint section");
    }
    ProjectionHead head;
    for (std::size_t l = 0; l < layers; ++l) {
        head.weights.push_back(read_matrix(is, "ProjectionHead.weights"));
        head.biases.push_back(read_vector(is, "ProjectionHead.biases"));
    }
    return head;
}

HeadGrads HeadGrads::zeros_like(const ProjectionHead& head) {
    HeadGrads g;
    for (const auto& w : head.weights) g.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : head.biases) g.biases.push_back(Eigen::VectorXd::Zero(b.size()));
    g.curvature = 0.0;
    return g;
}

bool HeadGrads::all_finite() const {
    if (!std::isfinite(curvature)) return false;
    for (const auto& w : weights) {
        if (!w.allFinite()) return false;
    }
    for (const auto& b : biases) {
        if (!b.allFinite()) return false;
    }
    return true;
}

Vec head_forward(const ProjectionHead& head, const Vec& x, ForwardCache* cache) {
    if (x.size() != head.weights.front().cols()) {
        throw DataError("head_forward: feature dimension mismatch");
    }
    if (cache) {
        cache->x = x;
        cache->pre.clear();
        cache->post.clear();
    }
    Vec h = x;
    const std::size_t layers = head.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        Vec a = head.weights[l] * h + head.biases[l];
        if (cache) cache->pre.push_back(a);
        if (l + 1 < layers) {
            h = a.array().tanh().matrix();
        } else {
            h = a;
        }
        if (cache) cache->post.push_back(h);
    }
    return h;
}

Vec embed_feature(const ProjectionHead& head, const Vec& x, double clip_radius, double c,
                  Space space, ForwardCache* cache) {
    const Vec raw = head_forward(head, x, cache);
    const Vec clipped = clip_to_radius(raw, clip_radius);
    if (cache) cache->clipped = clipped;
    if (space == Space::euclidean) return clipped;
    const Vec z = clip_to_ball(exp_map0(clipped, c), c);
    if (cache) cache->ball = z;
    return z;
}

void embed_backward(const ProjectionHead& head, const ForwardCache& cache, const Vec& gz,
                    double clip_radius, double c, Space space, HeadGrads& grads) {
    Vec g = gz;
    if (space == Space::hyperbolic) {
        const Vec pre_ball = exp_map0(cache.clipped, c);
        const MapGrad ball = clip_to_ball_vjp(pre_ball, c, g);
        grads.curvature += ball.gc;
        const MapGrad em = exp_map0_vjp(cache.clipped, c, ball.gx);
        grads.curvature += em.gc;
        g = em.gx;
    }
    g = clip_to_radius_vjp(cache.post.back(), clip_radius, g);

    const std::size_t layers = head.weights.size();
    for (std::size_t l = layers; l-- > 0;) {
        // g currently holds dL/d post[l]; map through tanh for hidden layers.
        Vec ga = g;
        if (l + 1 < layers) {
            const Vec& t = cache.post[l];
            ga = (g.array() * (1.0 - t.array().square())).matrix();
        }
        const Vec& input = (l == 0) ? cache.x : cache.post[l - 1];
        grads.weights[l] += ga * input.transpose();
        grads.biases[l] += ga;
        if (l > 0) g = head.weights[l].transpose() * ga;
    }
}

OptimizerState OptimizerState::init(const ProjectionHead& head, double lr0, double momentum,
                                    double weight_decay, int total_epochs) {
    if (lr0 <= 0.0) throw ConfigError("optimizer: lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("optimizer: momentum out of range");
    if (weight_decay < 0.0) throw ConfigError("optimizer: weight decay must be nonnegative");
    if (total_epochs < 0) throw ConfigError("optimizer: total_epochs must be nonnegative");
    OptimizerState opt;
    opt.lr0 = lr0;
    opt.momentum = momentum;
    opt.weight_decay = weight_decay;
    opt.total_epochs = total_epochs;
    for (const auto& w : head.weights) opt.w_buf.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : head.biases) opt.b_buf.push_back(Eigen::VectorXd::Zero(b.size()));
    opt.c_buf = 0.0;
    return opt;
}

double OptimizerState::lr(int epoch) const {
    const double e = static_cast<double>(epoch);
    const double total = static_cast<double>(std::max(total_epochs, 1));
    return 0.5 * lr0 * (1.0 + std::cos(3.14159265358979323846 * e / total));
}

void OptimizerState::save(std::ostream& os) const {
    os << "opt " << hex_double(lr0) << ' ' << hex_double(momentum) << ' '
       << hex_double(weight_decay) << ' ' << total_epochs << '\n';
    for (const auto& w : w_buf) write_matrix(os, w);
    for (const auto& b : b_buf) write_vector(os, b);
    os << "cbuf " << hex_double(c_buf) << '\n';
}

OptimizerState OptimizerState::load(std::istream& is) {
    std::string tag;
    if (!(is >> tag) || tag != "opt") throw DataError("optimizer: malformed checkpoint section");
    OptimizerState opt;
    opt.lr0 = read_hex_double(is, "optimizer.lr0");
    opt.momentum = read_hex_double(is, "optimizer.momentum");
    opt.weight_decay = read_hex_double(is, "optimizer.weight_decay");
    if (!(is >> opt.total_epochs)) throw DataError("optimizer: truncated checkpoint section");
    for (int l = 0; l < 3; ++l) opt.w_buf.push_back(read_matrix(is, "optimizer.w_buf"));
    for (int l = 0; l < 3; ++l) opt.b_buf.push_back(read_vector(is, "optimizer.b_buf"));
    if (!(is >> tag) || tag != "cbuf") throw DataError("optimizer: malformed checkpoint section");
    opt.c_buf = read_hex_double(is, "optimizer.c_buf");
    return opt;
}

void backward_and_step(ProjectionHead& head, double& curvature, const HeadGrads& grads,
                       OptimizerState& opt, int epoch) {
    if (!grads.all_finite()) {
        throw NumericError("backward_and_step: non-finite gradient, batch aborted");
    }
    const double eta = opt.lr(epoch);
    for (std::size_t l = 0; l < head.weights.size(); ++l) {
        Eigen::MatrixXd gw = grads.weights[l] + opt.weight_decay * head.weights[l];
        opt.w_buf[l] = opt.momentum * opt.w_buf[l] + gw;
        head.weights[l] -= eta * opt.w_buf[l];

        Eigen::VectorXd gb = grads.biases[l] + opt.weight_decay * head.biases[l];
        opt.b_buf[l] = opt.momentum * opt.b_buf[l] + gb;
        head.biases[l] -= eta * opt.b_buf[l];
    }
    opt.c_buf = opt.momentum * opt.c_buf + grads.curvature;  // no decay on curvature
    curvature = clamp_curvature(curvature - eta * opt.c_buf);
}

std::pair<Vec, Vec> make_views(const Vec& x, double strength, double mask_prob, Rng& rng) {
    if (strength < 0.0) throw ConfigError("make_views: strength must be nonnegative");
    if (mask_prob < 0.0 || mask_prob > 1.0) throw ConfigError("make_views: mask_prob out of range");
    auto one_view = [&]() {
        Vec v = x;
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += strength * rng.normal();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (rng.uniform() < mask_prob) v(i) = 0.0;
        }
        return v;
    };
    Vec a = one_view();
    Vec b = one_view();
    return {std::move(a), std::move(b)};
}

}  // namespace hidisc
