#include "hidisc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hidisc/euclidean.hpp"
#include "hidisc/losses.hpp"
#include "hidisc/mixing.hpp"
#include "hidisc/rng.hpp"
#include "hidisc/training.hpp"

namespace hidisc {

double rel_err(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / scale;
}

double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

namespace {

Vec random_direction(int d, Rng& rng) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v(i) = rng.normal();
    const double n = v.norm();
    return n > 0.0 ? Vec(v / n) : Vec(Vec::Unit(d, 0));
}

// Uniform-ish point with norm at most frac * min(1, 1/sqrt(c)).
Vec random_ball_point(int d, double c, double frac, Rng& rng) {
    const double rmax = frac * std::min(1.0, 1.0 / std::sqrt(c));
    const double r = rmax * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    return r * random_direction(d, rng);
}

struct Suite {
    std::vector<CheckResult> results;
    void add(const std::string& name, double worst, double tol) {
        results.push_back({name, worst, tol, worst < tol});
    }
};

// Worst relative FD error over every coordinate of `x` for scalar f(x).
double fd_vs_grad(Vec& x, const Vec& analytic, const std::function<double()>& f, double h) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double saved = x(i);
        const double num = central_diff(
            [&](double v) {
                x(i) = v;
                const double out = f();
                return out;
            },
            saved, h);
        x(i) = saved;
        worst = std::max(worst, rel_err(analytic(i), num));
    }
    return worst;
}

double fd_scalar(double& x, double analytic, const std::function<double()>& f, double h) {
    const double saved = x;
    const double num = central_diff(
        [&](double v) {
            x = v;
            return f();
        },
        saved, h);
    x = saved;
    return rel_err(analytic, num);
}

}  // namespace

std::vector<CheckResult> run_inverse_map_checks(std::uint64_t seed) {
    Suite suite;
    Rng rng(mix_seed(seed, 0x10));

    {
        double worst = 0.0;
        const double curvatures[] = {1e-6, 0.05, 1.0};
        for (double c : curvatures) {
            for (int t = 0; t < 1000; ++t) {
                const int d = 2 + static_cast<int>(rng.uniform_int(5));
                const Vec v = (3.0 * rng.uniform()) * random_direction(d, rng);
                const Vec back = log_map0(exp_map0(v, c), c);
                worst = std::max(worst, (back - v).norm());
            }
        }
        suite.add("exp_log_roundtrip", worst, 1e-6);
    }

    {
        double worst_id = 0.0, worst_inv = 0.0;
        for (int t = 0; t < 1000; ++t) {
            const int d = 2 + static_cast<int>(rng.uniform_int(5));
            const double c = (t % 2 == 0) ? 1.0 : 0.05;
            const Vec a = random_ball_point(d, c, 0.9, rng);
            const Vec zero = Vec::Zero(d);
            worst_id = std::max(worst_id, (mobius_add(a, zero, c) - a).norm());
            worst_inv = std::max(worst_inv, mobius_add(-a, a, c).norm());
        }
        suite.add("mobius_right_identity", worst_id, 1e-9);
        suite.add("mobius_left_inverse", worst_inv, 1e-9);
    }

    {
        double worst_sym = 0.0, worst_tri = 0.0;
        for (int t = 0; t < 1000; ++t) {
            const int d = 2 + static_cast<int>(rng.uniform_int(5));
            const double c = (t % 2 == 0) ? 1.0 : 0.05;
            const Vec a = random_ball_point(d, c, 0.85, rng);
            const Vec b = random_ball_point(d, c, 0.85, rng);
            const Vec e = random_ball_point(d, c, 0.85, rng);
            worst_sym = std::max(worst_sym, std::abs(distance(a, b, c) - distance(b, a, c)));
            worst_tri = std::max(worst_tri,
                                 distance(a, e, c) - distance(a, b, c) - distance(b, e, c));
        }
        suite.add("metric_symmetry", worst_sym, 1e-9);
        suite.add("triangle_inequality_slack", worst_tri, 1e-7);
    }

    {
        double worst = 0.0;
        const double c = 1e-9;
        for (int t = 0; t < 1000; ++t) {
            const int d = 2 + static_cast<int>(rng.uniform_int(5));
            const Vec a = 0.95 * random_ball_point(d, 1.0, 1.0, rng);
            Vec b = 0.95 * random_ball_point(d, 1.0, 1.0, rng);
            if ((a - b).norm() < 1e-3) b(0) += 0.1;
            const double flat = 2.0 * (a - b).norm();
            worst = std::max(worst, std::abs(distance(a, b, c) - flat) / flat);
        }
        suite.add("euclidean_limit", worst, 1e-3);
    }

    {
        // Strict ball membership for exp-map and Mobius outputs.
        double worst = 0.0;
        for (int t = 0; t < 1000; ++t) {
            const int d = 2 + static_cast<int>(rng.uniform_int(5));
            const double c = 0.05 + 2.0 * rng.uniform();
            Vec v = (50.0 * rng.uniform()) * random_direction(d, rng);
            const Vec z = exp_map0(v, c);
            worst = std::max(worst, c * z.squaredNorm());
            const Vec a = random_ball_point(d, c, 0.999, rng);
            const Vec b = random_ball_point(d, c, 0.999, rng);
            const Vec m = mobius_add(a, b, c);
            worst = std::max(worst, c * m.squaredNorm());
        }
        suite.add("ball_membership", worst, 1.0);
    }

    {
        double worst_ball = 0.0, worst_lin = 0.0;
        const double curvatures[] = {0.05, 1.0};
        for (double c : curvatures) {
            for (int t = 0; t < 5000; ++t) {
                const int d = 2 + static_cast<int>(rng.uniform_int(5));
                const Vec zi = random_ball_point(d, c, 0.999, rng);
                const Vec zj = random_ball_point(d, c, 0.999, rng);
                const double lambda = rng.uniform();
                const Vec mix = tangent_cutmix(zi, zj, lambda, c);
                worst_ball = std::max(worst_ball, c * mix.squaredNorm());
                const Vec lin = lambda * log_map0(zi, c) + (1.0 - lambda) * log_map0(zj, c);
                worst_lin = std::max(worst_lin, (log_map0(mix, c) - lin).norm());
            }
        }
        suite.add("cutmix_ball_membership", worst_ball, 1.0);
        suite.add("cutmix_tangent_linearity", worst_lin, 1e-6);
    }

    return suite.results;
}

std::vector<CheckResult> run_gradient_checks(std::uint64_t seed) {
    Suite suite;
    Rng rng(mix_seed(seed, 0x20));
    constexpr double kH = 1e-5;
    constexpr double kTol = 1e-4;
    constexpr int kConfigs = 100;

    {
        double worst = 0.0;
        for (int t = 0; t < kConfigs; ++t) {
            const int d = 2 + static_cast<int>(rng.uniform_int(5));
            double c = 0.05 + 2.0 * rng.uniform();
            Vec v = (2.0 * rng.uniform()) * random_direction(d, rng);
            if (v.norm() < 0.05) v = 0.1 * random_direction(d, rng);
            const Vec w = random_direction(d, rng);
            const MapGrad g = exp_map0_vjp(v, c, w);
            auto f = [&]() { return w.dot(exp_map0(v, c)); };
            worst = std::max(worst, fd_vs_grad(v, g.gx, f, kH));
            worst = std::max(worst, fd_scalar(c, g.gc, f, kH));
        }
        suite.add("grad_exp_map0", worst, kTol);
    }

    {
        double worst = 0.0;
        for (int t = 0; t < kConfigs; ++t) {
            const int d = 2 + static_cast<int>(rng.uniform_int(5));
            double c = 0.05 + 2.0 * rng.uniform();
            Vec z = random_ball_point(d, c, 0.7, rng);
            if (z.norm() < 0.05) z = 0.1 * random_direction(d, rng);
            const Vec w = random_direction(d, rng);
            const MapGrad g = log_map0_vjp(z, c, w);
            auto f = [&]() { return w.dot(log_map0(z, c)); };
            worst = std::max(worst, fd_vs_grad(z, g.gx, f, kH));
            worst = std::max(worst, fd_scalar(c, g.gc, f, kH));
        }
        suite.add("grad_log_map0", worst, kTol);
    }

    {
        double worst = 0.0;
        for (int t = 0; t < kConfigs; ++t) {
            const int d = 2 + static_cast<int>(rng.uniform_int(5));
            double c = 0.05 + 2.0 * rng.uniform();
            Vec a = random_ball_point(d, c, 0.6, rng);
            Vec b = random_ball_point(d, c, 0.6, rng);
            const Vec w = random_direction(d, rng);
            const PairGrad g = mobius_add_vjp(a, b, c, w);
            auto f = [&]() { return w.dot(mobius_add(a, b, c)); };
            worst = std::max(worst, fd_vs_grad(a, g.ga, f, kH));
            worst = std::max(worst, fd_vs_grad(b, g.gb, f, kH));
            worst = std::max(worst, fd_scalar(c, g.gc, f, kH));
        }
        suite.add("grad_mobius_add", worst, kTol);
    }

    {
        double worst = 0.0;
        for (int t = 0; t < kConfigs; ++t) {
            const int d = 2 + static_cast<int>(rng.uniform_int(5));
            double c = 0.05 + 2.0 * rng.uniform();
            Vec a = random_ball_point(d, c, 0.7, rng);
            Vec b = random_ball_point(d, c, 0.7, rng);
            if ((a - b).norm() < 0.05) b += 0.1 * random_direction(d, rng);
            const PairGrad g = distance_grad(a, b, c);
            auto f = [&]() { return distance(a, b, c); };
            worst = std::max(worst, fd_vs_grad(a, g.ga, f, kH));
            worst = std::max(worst, fd_vs_grad(b, g.gb, f, kH));
            worst = std::max(worst, fd_scalar(c, g.gc, f, kH));
        }
        suite.add("grad_distance", worst, kTol);
    }

    {
        double worst = 0.0;
        for (int t = 0; t < kConfigs; ++t) {
            const int d = 2 + static_cast<int>(rng.uniform_int(5));
            double c = 0.05 + 2.0 * rng.uniform();
            Vec z = random_ball_point(d, c, 0.8, rng);
            if (z.norm() > 0.9) z *= 0.9 / z.norm();
            const Vec p = random_direction(d, rng);
            if ((z - p).norm() < 0.05) z *= 0.5;
            const double phi = 0.9 * rng.uniform();
            const ScalarGrad g = busemann_loss(z, p, c, phi);
            auto f = [&]() { return busemann_loss(z, p, c, phi).value; };
            worst = std::max(worst, fd_vs_grad(z, g.gz, f, kH));
            worst = std::max(worst, fd_scalar(c, g.gc, f, kH));
        }
        suite.add("grad_busemann", worst, kTol);
    }

    {
        double worst = 0.0;
        for (int t = 0; t < kConfigs; ++t) {
            const int d = 2 + static_cast<int>(rng.uniform_int(5));
            double c = 0.05 + 2.0 * rng.uniform();
            Vec z1 = random_ball_point(d, c, 0.6, rng);
            Vec z2 = random_ball_point(d, c, 0.6, rng);
            if ((z1 - z2).norm() < 0.05) z2 += 0.1 * random_direction(d, rng);
            if (z1.norm() < 0.05) z1 = 0.1 * random_direction(d, rng);
            if (z2.norm() < 0.05) z2 = 0.15 * random_direction(d, rng);
            const double alpha = rng.uniform();
            const HybridGrad g = hybrid_similarity_grad(z1, z2, c, alpha);
            auto f = [&]() { return hybrid_similarity(z1, z2, c, alpha); };
            worst = std::max(worst, fd_vs_grad(z1, g.g1, f, kH));
            worst = std::max(worst, fd_vs_grad(z2, g.g2, f, kH));
            worst = std::max(worst, fd_scalar(c, g.gc, f, kH));
        }
        suite.add("grad_hybrid_similarity", worst, kTol);
    }

    {
        double worst = 0.0;
        ContrastiveConfig ccfg;
        ccfg.temperature = 0.3;
        ccfg.alpha_max = 1.0;
        ccfg.total_epochs = 50;
        for (int t = 0; t < kConfigs; ++t) {
            const int d = 3;
            double c = 0.05 + 1.5 * rng.uniform();
            const int epoch = static_cast<int>(rng.uniform_int(51));
            std::vector<Vec> v1, v2;
            for (int i = 0; i < 4; ++i) {
                Vec a = random_ball_point(d, c, 0.5, rng);
                Vec b = random_ball_point(d, c, 0.5, rng);
                if (a.norm() < 0.05) a = 0.1 * random_direction(d, rng);
                if (b.norm() < 0.05) b = 0.12 * random_direction(d, rng);
                v1.push_back(a);
                v2.push_back(b);
            }
            const ContrastiveGrad g = contrastive_loss(v1, v2, c, ccfg, epoch);
            auto f = [&]() { return contrastive_loss(v1, v2, c, ccfg, epoch).value; };
            for (int i = 0; i < 4; ++i) {
                worst = std::max(worst, fd_vs_grad(v1[static_cast<std::size_t>(i)],
                                                   g.g_view1[static_cast<std::size_t>(i)], f, kH));
                worst = std::max(worst, fd_vs_grad(v2[static_cast<std::size_t>(i)],
                                                   g.g_view2[static_cast<std::size_t>(i)], f, kH));
            }
            worst = std::max(worst, fd_scalar(c, g.gc, f, kH));
        }
        suite.add("grad_contrastive", worst, kTol);
    }

    {
        double worst = 0.0;
        int done = 0;
        int attempts = 0;
        while (done < kConfigs && attempts < kConfigs * 20) {
            attempts++;
            const int d = 3;
            double c = 0.05 + 1.5 * rng.uniform();
            const PrototypeSet ps = place_prototypes(3, d, mix_seed(seed, 0x21) + attempts);
            std::vector<Vec> sample;
            for (int i = 0; i < 6; ++i) sample.push_back(random_ball_point(d, c, 0.8, rng));
            const OutlierMargin margin = compute_margin(sample, ps, c, 0.8);

            std::vector<Vec> mixed;
            for (int i = 0; i < 3; ++i) mixed.push_back(random_ball_point(d, c, 0.8, rng));

            // Stay away from hinge and argmin kinks.
            bool near_kink = false;
            for (const Vec& z : mixed) {
                std::vector<double> ds;
                for (int k = 0; k < ps.size(); ++k) {
                    ds.push_back(distance(z, pulled_prototype(ps, k, c), c));
                }
                std::sort(ds.begin(), ds.end());
                if (ds.size() > 1 && ds[1] - ds[0] < 1e-2) near_kink = true;
                if (std::abs(margin.gamma - ds[0]) < 1e-2) near_kink = true;
            }
            if (near_kink) continue;
            done++;

            const BatchGrad g = outlier_loss(mixed, ps, c, margin);
            auto f = [&]() { return outlier_loss(mixed, ps, c, margin).value; };
            for (std::size_t i = 0; i < mixed.size(); ++i) {
                worst = std::max(worst, fd_vs_grad(mixed[i], g.gz[i], f, kH));
            }
            worst = std::max(worst, fd_scalar(c, g.gc, f, kH));
        }
        suite.add("grad_outlier", worst, kTol);
    }

    {
        double worst = 0.0;
        for (int t = 0; t < kConfigs; ++t) {
            const int d = 2 + static_cast<int>(rng.uniform_int(4));
            double c = 0.05 + 1.5 * rng.uniform();
            Vec zi = random_ball_point(d, c, 0.8, rng);
            Vec zj = random_ball_point(d, c, 0.8, rng);
            if (zi.norm() < 0.05) zi = 0.1 * random_direction(d, rng);
            if (zj.norm() < 0.05) zj = 0.12 * random_direction(d, rng);
            const double lambda = 0.05 + 0.9 * rng.uniform();
            const Vec w = random_direction(d, rng);
            const CutmixGrad g = tangent_cutmix_vjp(zi, zj, lambda, c, w);
            auto f = [&]() { return w.dot(tangent_cutmix(zi, zj, lambda, c)); };
            worst = std::max(worst, fd_vs_grad(zi, g.gi, f, kH));
            worst = std::max(worst, fd_vs_grad(zj, g.gj, f, kH));
            worst = std::max(worst, fd_scalar(c, g.gc, f, kH));
        }
        suite.add("grad_tangent_cutmix", worst, kTol);
    }

    {
        // Flat-space analogues: softmax and contrastive.
        double worst = 0.0;
        for (int t = 0; t < kConfigs; ++t) {
            const int d = 3;
            std::vector<Vec> zs;
            std::vector<int> labels;
            for (int i = 0; i < 6; ++i) {
                Vec z(d);
                for (int j = 0; j < d; ++j) z(j) = rng.normal();
                zs.push_back(z);
                labels.push_back(i % 3);
            }
            const BatchGrad g = euclidean_prototype_softmax(zs, labels);
            auto f = [&]() { return euclidean_prototype_softmax(zs, labels).value; };
            for (std::size_t i = 0; i < zs.size(); ++i) {
                worst = std::max(worst, fd_vs_grad(zs[i], g.gz[i], f, kH));
            }

            std::vector<Vec> v1, v2;
            for (int i = 0; i < 4; ++i) {
                Vec a(d), b(d);
                for (int j = 0; j < d; ++j) {
                    a(j) = rng.normal();
                    b(j) = rng.normal();
                }
                v1.push_back(a);
                v2.push_back(b);
            }
            const ContrastiveGrad gc = euclidean_contrastive(v1, v2, 0.5);
            auto f2 = [&]() { return euclidean_contrastive(v1, v2, 0.5).value; };
            for (int i = 0; i < 4; ++i) {
                worst = std::max(worst, fd_vs_grad(v1[static_cast<std::size_t>(i)],
                                                   gc.g_view1[static_cast<std::size_t>(i)], f2, kH));
                worst = std::max(worst, fd_vs_grad(v2[static_cast<std::size_t>(i)],
                                                   gc.g_view2[static_cast<std::size_t>(i)], f2, kH));
            }
        }
        suite.add("grad_euclidean_losses", worst, kTol);
    }

    {
        // End-to-end batch objective on a tiny head, both spaces. Configs that
        // land near a hinge, argmin, or clip kink are resampled.
        double worst_hyp = 0.0, worst_euc = 0.0;
        int done_hyp = 0, done_euc = 0;
        for (int t = 0; done_hyp + done_euc < 2 * kConfigs && t < 40 * kConfigs; ++t) {
            const Space space = (t % 2 == 0) ? Space::hyperbolic : Space::euclidean;
            if (space == Space::hyperbolic && done_hyp >= kConfigs) continue;
            if (space == Space::euclidean && done_euc >= kConfigs) continue;
            Rng wrng(mix_seed(seed, 0x30) + static_cast<std::uint64_t>(t));
            ProjectionHead head = ProjectionHead::init({8, 16, 8, 4}, wrng);
            double c = 0.05 + 0.5 * wrng.uniform();
            const PrototypeSet ps =
                place_prototypes(2, 4, mix_seed(seed, 0x31) + static_cast<std::uint64_t>(t));

            std::vector<Vec> view1, view2;
            std::vector<int> proto_idx;
            for (int i = 0; i < 4; ++i) {
                Vec a(8), b(8);
                for (int j = 0; j < 8; ++j) {
                    a(j) = wrng.normal();
                    b(j) = a(j) + 0.1 * wrng.normal();
                }
                view1.push_back(a);
                view2.push_back(b);
                proto_idx.push_back(i % 2);
            }
            const std::vector<MixedBatch::Parent> parents{{0, 1, 0.4}, {2, 3, 0.7}};

            StepParams sp;
            sp.weights = LossWeights{0.60, 0.25, 0.15};
            sp.phi = 0.75;
            sp.clip_radius = 1.5;
            sp.temperature = 0.3;
            sp.alpha_max = 1.0;
            sp.total_epochs = 50;
            sp.epoch = static_cast<int>(wrng.uniform_int(51));
            sp.space = space;

            bool near_kink = false;
            std::vector<Vec> z1, means;
            for (const Vec& v : view1) {
                ForwardCache cache;
                z1.push_back(embed_feature(head, v, sp.clip_radius, c, space, &cache));
                if (std::abs(cache.post.back().norm() - sp.clip_radius) < 5e-3) near_kink = true;
            }
            for (const Vec& v : view2) {
                const Vec raw = head_forward(head, v);
                if (std::abs(raw.norm() - sp.clip_radius) < 5e-3) near_kink = true;
            }

            OutlierMargin margin;
            if (space == Space::hyperbolic) {
                margin = compute_margin(z1, ps, c, 0.8);
            } else {
                std::vector<int> lab(proto_idx.begin(), proto_idx.end());
                means = batch_class_means(z1, lab).means;
                margin = euclidean_margin(z1, means, 0.8);
            }
            margin.gamma *= 1.07;

            const MixedBatch mixed = space == Space::hyperbolic
                                         ? realize_mixed(z1, parents, c)
                                         : realize_mixed_euclidean(z1, parents);
            for (const Vec& z : mixed.points) {
                std::vector<double> ds;
                if (space == Space::hyperbolic) {
                    for (int k = 0; k < ps.size(); ++k) {
                        ds.push_back(distance(z, pulled_prototype(ps, k, c), c));
                    }
                } else {
                    for (const Vec& mu : means) ds.push_back((z - mu).norm());
                }
                std::sort(ds.begin(), ds.end());
                if (ds.size() > 1 && ds[1] - ds[0] < 5e-3) near_kink = true;
                if (std::abs(margin.gamma - ds[0]) < 5e-3) near_kink = true;
            }
            if (near_kink) continue;

            const BatchLoss bl = batch_loss_and_grads(head, c, view1, view2, proto_idx, ps,
                                                      margin, parents, sp);
            auto f = [&]() {
                return batch_loss_and_grads(head, c, view1, view2, proto_idx, ps, margin, parents,
                                            sp)
                    .total;
            };
            double worst = 0.0;
            constexpr double kHEnd = 1e-4;
            for (std::size_t l = 0; l < head.weights.size(); ++l) {
                for (Eigen::Index i = 0; i < head.weights[l].rows(); ++i) {
                    for (Eigen::Index j = 0; j < head.weights[l].cols(); ++j) {
                        const double saved = head.weights[l](i, j);
                        const double num = central_diff(
                            [&](double v) {
                                head.weights[l](i, j) = v;
                                return f();
                            },
                            saved, kHEnd);
                        head.weights[l](i, j) = saved;
                        worst = std::max(worst, rel_err(bl.grads.weights[l](i, j), num));
                    }
                }
                Vec& bias = head.biases[l];
                worst = std::max(worst, fd_vs_grad(bias, bl.grads.biases[l], f, kHEnd));
            }
            if (space == Space::hyperbolic) {
                worst = std::max(worst, fd_scalar(c, bl.grads.curvature, f, kHEnd));
                worst_hyp = std::max(worst_hyp, worst);
                done_hyp++;
            } else {
                worst_euc = std::max(worst_euc, worst);
                done_euc++;
            }
        }
        suite.add("grad_end_to_end_hyperbolic", worst_hyp, 1e-3);
        suite.add("grad_end_to_end_euclidean", worst_euc, 1e-3);
    }

    return suite.results;
}

std::vector<CheckResult> run_all_checks(std::uint64_t seed) {
    std::vector<CheckResult> all = run_inverse_map_checks(seed);
    const std::vector<CheckResult> grads = run_gradient_checks(seed);
    all.insert(all.end(), grads.begin(), grads.end());
    return all;
}

}  // namespace hidisc
