#include "hidisc/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "hidisc/errors.hpp"
#include "hidisc/euclidean.hpp"
#include "hidisc/io.hpp"

namespace hidisc {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be nonnegative");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    weights.validate();
    if (phi < 0.0 || phi >= 1.0) throw ConfigError("phi must lie in [0,1)");
    if (clip_radius <= 0.0) throw ConfigError("clip_radius must be positive");
    if (margin_quantile <= 0.0 || margin_quantile >= 1.0) {
        throw ConfigError("margin_quantile must lie in (0,1)");
    }
    if (temperature <= 0.0) throw ConfigError("temperature must be positive");
    if (alpha_max < 0.0 || alpha_max > 1.0) throw ConfigError("alpha_max must lie in [0,1]");
    if (view_strength < 0.0) throw ConfigError("view_strength must be nonnegative");
    if (view_mask_prob < 0.0 || view_mask_prob > 1.0) {
        throw ConfigError("view_mask_prob must lie in [0,1]");
    }
    if (lr <= 0.0) throw ConfigError("lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum out of range");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
    if (curvature_init < kCurvatureMin || curvature_init > kCurvatureMax) {
        throw ConfigError("curvature_init outside the allowed range");
    }
    if (hidden_dims.size() != 2) throw ConfigError("hidden_dims must list exactly 2 widths");
    for (int h : hidden_dims) {
        if (h < 1) throw ConfigError("hidden_dims must be positive");
    }
    if (embed_dim < 2) throw ConfigError("embed_dim must be at least 2");
}

std::string TrainLog::to_text() const {
    std::ostringstream os;
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const auto& r : records) {
        os << "epoch=" << r.epoch << " l_buse=" << fmt(r.l_buse) << " l_u=" << fmt(r.l_u)
           << " l_out=" << fmt(r.l_out) << " total=" << fmt(r.total) << " c=" << fmt(r.curvature)
           << " alpha_d=" << fmt(r.alpha_d) << " lr=" << fmt(r.lr) << '\n';
    }
    return os.str();
}

Vec TrainedModel::embed(const Vec& x) const {
    return embed_feature(head, x, clip_radius, curvature, space);
}

Eigen::MatrixXd TrainedModel::embed_dataset(const FeatureDataset& data) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(data.rows.size()), head.output_dim());
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        Vec z = embed(data.rows[i].features);
        if (space == Space::hyperbolic) z = log_map0(z, curvature);
        out.row(static_cast<Eigen::Index>(i)) = z.transpose();
    }
    return out;
}

void TrainedModel::save(std::ostream& os) const {
    os << "HIDISC-CHECKPOINT v1\n";
    os << "space " << (space == Space::hyperbolic ? "hyperbolic" : "euclidean") << '\n';
    os << "curvature " << hex_double(curvature) << '\n';
    os << "clip_radius " << hex_double(clip_radius) << '\n';
    os << "epochs_trained " << epochs_trained << '\n';
    head.save(os);
    os << "prototypes " << prototypes.size() << '\n';
    for (int k = 0; k < prototypes.size(); ++k) {
        os << prototypes.class_ids()[static_cast<std::size_t>(k)] << '\n';
    }
    write_matrix(os, prototypes.matrix());
    os << "margin " << hex_double(margin.gamma) << ' ' << hex_double(margin.quantile) << ' '
       << (margin.frozen ? 1 : 0) << '\n';
    opt.save(os);
    os << "rng ";
    rng.save(os);
    os << '\n';
}

void TrainedModel::save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write checkpoint '" + path + "'");
    save(os);
    if (!os) throw DataError("write failed for checkpoint '" + path + "'");
}

TrainedModel TrainedModel::load(std::istream& is) {
    std::string magic, version;
    if (!(is >> magic >> version) || magic != "HIDISC-CHECKPOINT" || version != "v1") {
        throw DataError("unrecognized checkpoint header");
    }
    TrainedModel m;
    std::string tag, value;
    if (!(is >> tag >> value) || tag != "space") throw DataError("checkpoint: missing space");
    if (value == "hyperbolic") m.space = Space::hyperbolic;
    else if (value == "euclidean") m.space = Space::euclidean;
    else throw DataError("checkpoint: unknown space '" + value + "'");
    if (!(is >> tag) || tag != "curvature") throw DataError("checkpoint: missing curvature");
    m.curvature = read_hex_double(is, "checkpoint.curvature");
    if (!(is >> tag) || tag != "clip_radius") throw DataError("checkpoint: missing clip_radius");
    m.clip_radius = read_hex_double(is, "checkpoint.clip_radius");
    if (!(is >> tag >> m.epochs_trained) || tag != "epochs_trained") {
        throw DataError("checkpoint: missing epochs_trained");
    }
    m.head = ProjectionHead::load(is);
    int n_protos = 0;
    if (!(is >> tag >> n_protos) || tag != "prototypes") {
        throw DataError("checkpoint: missing prototypes");
    }
    std::vector<std::string> ids(static_cast<std::size_t>(n_protos));
    for (auto& id : ids) {
        if (!(is >> id)) throw DataError("checkpoint: truncated prototype ids");
    }
    m.prototypes = PrototypeSet(read_matrix(is, "checkpoint.prototypes"), std::move(ids));
    if (!(is >> tag) || tag != "margin") throw DataError("checkpoint: missing margin");
    m.margin.gamma = read_hex_double(is, "checkpoint.margin");
    m.margin.quantile = read_hex_double(is, "checkpoint.margin");
    int frozen = 0;
    if (!(is >> frozen)) throw DataError("checkpoint: truncated margin");
    m.margin.frozen = frozen != 0;
    m.opt = OptimizerState::load(is);
    if (!(is >> tag) || tag != "rng") throw DataError("checkpoint: missing rng state");
    m.rng.load(is);
    return m;
}

TrainedModel TrainedModel::load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint '" + path + "'");
    return load(is);
}

BatchLoss batch_loss_and_grads(const ProjectionHead& head, double curvature,
                               const std::vector<Vec>& view1, const std::vector<Vec>& view2,
                               const std::vector<int>& proto_idx, const PrototypeSet& ps,
                               const OutlierMargin& margin,
                               const std::vector<MixedBatch::Parent>& parents,
                               const StepParams& sp) {
    const std::size_t b = view1.size();
    if (b < 2 || view2.size() != b || proto_idx.size() != b) {
        throw ConfigError("batch_loss_and_grads: malformed batch");
    }

    BatchLoss out;
    out.grads = HeadGrads::zeros_like(head);

    std::vector<Vec> z1(b), z2(b);
    std::vector<ForwardCache> cache1(b), cache2(b);
    for (std::size_t i = 0; i < b; ++i) {
        z1[i] = embed_feature(head, view1[i], sp.clip_radius, curvature, sp.space, &cache1[i]);
        z2[i] = embed_feature(head, view2[i], sp.clip_radius, curvature, sp.space, &cache2[i]);
    }

    const int d_out = head.output_dim();
    std::vector<Vec> gz1(b, Vec::Zero(d_out)), gz2(b, Vec::Zero(d_out));

    ContrastiveConfig ccfg;
    ccfg.temperature = sp.temperature;
    ccfg.alpha_max = sp.alpha_max;
    ccfg.total_epochs = sp.total_epochs;

    if (sp.space == Space::hyperbolic) {
        const MixedBatch mixed = realize_mixed(z1, parents, curvature);

        std::vector<Vec> all_views;
        std::vector<int> all_protos;
        all_views.reserve(2 * b);
        all_protos.reserve(2 * b);
        for (std::size_t i = 0; i < b; ++i) {
            all_views.push_back(z1[i]);
            all_protos.push_back(proto_idx[i]);
        }
        for (std::size_t i = 0; i < b; ++i) {
            all_views.push_back(z2[i]);
            all_protos.push_back(proto_idx[i]);
        }
        const BatchGrad buse = busemann_loss_batch(all_views, all_protos, ps, curvature, sp.phi);
        out.l_buse = buse.value;
        out.grads.curvature += sp.weights.lambda1 * buse.gc;
        for (std::size_t i = 0; i < b; ++i) {
            gz1[i] += sp.weights.lambda1 * buse.gz[i];
            gz2[i] += sp.weights.lambda1 * buse.gz[b + i];
        }

        const ContrastiveGrad con = contrastive_loss(z1, z2, curvature, ccfg, sp.epoch);
        out.l_u = con.value;
        out.grads.curvature += sp.weights.lambda2 * con.gc;
        for (std::size_t i = 0; i < b; ++i) {
            gz1[i] += sp.weights.lambda2 * con.g_view1[i];
            gz2[i] += sp.weights.lambda2 * con.g_view2[i];
        }

        const BatchGrad outl = outlier_loss(mixed.points, ps, curvature, margin);
        out.l_out = outl.value;
        out.grads.curvature += sp.weights.lambda3 * outl.gc;
        for (std::size_t m = 0; m < mixed.size(); ++m) {
            const auto& par = mixed.parents[m];
            const CutmixGrad cg =
                tangent_cutmix_vjp(z1[static_cast<std::size_t>(par.i)],
                                   z1[static_cast<std::size_t>(par.j)], par.lambda, curvature,
                                   outl.gz[m]);
            gz1[static_cast<std::size_t>(par.i)] += sp.weights.lambda3 * cg.gi;
            gz1[static_cast<std::size_t>(par.j)] += sp.weights.lambda3 * cg.gj;
            out.grads.curvature += sp.weights.lambda3 * cg.gc;
        }
    } else {
        const MixedBatch mixed = realize_mixed_euclidean(z1, parents);

        std::vector<Vec> all_views;
        std::vector<int> all_labels;
        all_views.reserve(2 * b);
        all_labels.reserve(2 * b);
        for (std::size_t i = 0; i < b; ++i) {
            all_views.push_back(z1[i]);
            all_labels.push_back(proto_idx[i]);
        }
        for (std::size_t i = 0; i < b; ++i) {
            all_views.push_back(z2[i]);
            all_labels.push_back(proto_idx[i]);
        }
        const ClassMeans cm = batch_class_means(all_views, all_labels);

        const BatchGrad proto = euclidean_prototype_softmax(all_views, all_labels);
        out.l_buse = proto.value;
        for (std::size_t i = 0; i < b; ++i) {
            gz1[i] += sp.weights.lambda1 * proto.gz[i];
            gz2[i] += sp.weights.lambda1 * proto.gz[b + i];
        }

        const ContrastiveGrad con = euclidean_contrastive(z1, z2, sp.temperature);
        out.l_u = con.value;
        for (std::size_t i = 0; i < b; ++i) {
            gz1[i] += sp.weights.lambda2 * con.g_view1[i];
            gz2[i] += sp.weights.lambda2 * con.g_view2[i];
        }

        const EuclideanOutlierGrad outl = euclidean_outlier(mixed.points, cm.means, margin);
        out.l_out = outl.value;
        for (std::size_t m = 0; m < mixed.size(); ++m) {
            const auto& par = mixed.parents[m];
            gz1[static_cast<std::size_t>(par.i)] +=
                sp.weights.lambda3 * par.lambda * outl.g_mixed[m];
            gz1[static_cast<std::size_t>(par.j)] +=
                sp.weights.lambda3 * (1.0 - par.lambda) * outl.g_mixed[m];
        }
        // Class means are batch functions; distribute their gradient share.
        for (std::size_t k = 0; k < cm.means.size(); ++k) {
            if (outl.g_means[k].size() == 0 || outl.g_means[k].isZero(0.0)) continue;
            const Vec share =
                sp.weights.lambda3 * outl.g_means[k] / static_cast<double>(cm.counts[k]);
            for (std::size_t s = 0; s < all_views.size(); ++s) {
                if (cm.class_of_sample[s] != static_cast<int>(k)) continue;
                if (s < b) gz1[s] += share;
                else gz2[s - b] += share;
            }
        }
    }

    for (std::size_t i = 0; i < b; ++i) {
        embed_backward(head, cache1[i], gz1[i], sp.clip_radius, curvature, sp.space, out.grads);
        embed_backward(head, cache2[i], gz2[i], sp.clip_radius, curvature, sp.space, out.grads);
    }

    out.total = total_loss(out.l_buse, out.l_u, out.l_out, sp.weights);
    return out;
}

TrainResult train(const FeatureDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.rows.empty()) throw ConfigError("train: empty dataset");

    const std::vector<std::string> classes = data.unique_labels();
    if (classes.size() < 2) {
        throw ConfigError(
            "train: need at least 2 seen classes (contrastive pairs and mixing are undefined)");
    }

    TrainResult result;
    TrainedModel& model = result.model;
    model.space = cfg.space;
    model.curvature = cfg.curvature_init;
    model.clip_radius = cfg.clip_radius;
    model.prototypes = place_prototypes(static_cast<int>(classes.size()), cfg.embed_dim,
                                        mix_seed(cfg.seed, 0x01), classes);
    model.margin.quantile = cfg.margin_quantile;

    Rng init_rng(mix_seed(cfg.seed, 0x02));
    const std::vector<int> dims{data.dim, cfg.hidden_dims[0], cfg.hidden_dims[1], cfg.embed_dim};
    model.head = ProjectionHead::init(dims, init_rng);
    model.opt = OptimizerState::init(model.head, cfg.lr, cfg.momentum, cfg.weight_decay,
                                     cfg.epochs);
    model.rng = Rng(mix_seed(cfg.seed, 0x03));

    StepParams sp;
    sp.weights = cfg.weights;
    sp.phi = cfg.phi;
    sp.clip_radius = cfg.clip_radius;
    sp.temperature = cfg.temperature;
    sp.alpha_max = cfg.alpha_max;
    sp.total_epochs = std::max(cfg.epochs, 1);
    sp.space = cfg.space;

    std::vector<int> row_proto(data.rows.size());
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        row_proto[i] = model.prototypes.index_of(data.rows[i].label);
    }

    std::vector<std::size_t> order(data.rows.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        sp.epoch = epoch;
        const double alpha_d = alpha_schedule(epoch, cfg.alpha_max, sp.total_epochs);
        const double lr_now = model.opt.lr(epoch);
        model.rng.shuffle(order);

        double sum_buse = 0.0, sum_u = 0.0, sum_out = 0.0, sum_total = 0.0;
        long batches_done = 0;

        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::size_t b = end - start;
            if (b < 2) break;  // short tail with a single sample is dropped

            std::vector<Vec> view1(b), view2(b);
            std::vector<int> proto_idx(b);
            for (std::size_t i = 0; i < b; ++i) {
                const FeatureRow& row = data.rows[order[start + i]];
                proto_idx[i] = row_proto[order[start + i]];
                auto views = make_views(row.features, cfg.view_strength, cfg.view_mask_prob,
                                        model.rng);
                view1[i] = std::move(views.first);
                view2[i] = std::move(views.second);
            }
            const std::vector<MixedBatch::Parent> parents =
                sample_mix_parents(proto_idx, model.rng);

            // Margin freeze on the very first batch, from the mixed points
            // (or the batch embeddings when no mix exists).
            if (!model.margin.frozen) {
                std::vector<Vec> z1(b);
                for (std::size_t i = 0; i < b; ++i) {
                    z1[i] = embed_feature(model.head, view1[i], cfg.clip_radius, model.curvature,
                                          cfg.space);
                }
                if (cfg.space == Space::hyperbolic) {
                    const MixedBatch mixed = realize_mixed(z1, parents, model.curvature);
                    model.margin = compute_margin(mixed.empty() ? z1 : mixed.points,
                                                  model.prototypes, model.curvature,
                                                  cfg.margin_quantile);
                } else {
                    const MixedBatch mixed = realize_mixed_euclidean(z1, parents);
                    std::vector<int> labels1(proto_idx.begin(), proto_idx.end());
                    const ClassMeans cm = batch_class_means(z1, labels1);
                    model.margin = euclidean_margin(mixed.empty() ? z1 : mixed.points, cm.means,
                                                    cfg.margin_quantile);
                }
            }

            try {
                const BatchLoss bl = batch_loss_and_grads(model.head, model.curvature, view1,
                                                          view2, proto_idx, model.prototypes,
                                                          model.margin, parents, sp);
                backward_and_step(model.head, model.curvature, bl.grads, model.opt, epoch);
                sum_buse += bl.l_buse;
                sum_u += bl.l_u;
                sum_out += bl.l_out;
                sum_total += bl.total;
                batches_done++;
            } catch (const NumericError& err) {
                std::cerr << "hidisc: skipping batch at epoch " << epoch << ": " << err.what()
                          << '\n';
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        const double denom = batches_done > 0 ? static_cast<double>(batches_done) : 1.0;
        rec.l_buse = sum_buse / denom;
        rec.l_u = sum_u / denom;
        rec.l_out = sum_out / denom;
        rec.total = sum_total / denom;
        rec.curvature = model.curvature;
        rec.alpha_d = alpha_d;
        rec.lr = lr_now;
        result.log.records.push_back(rec);
    }

    model.epochs_trained = cfg.epochs;
    return result;
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    os << "all_acc: " << fmt(all_acc) << '\n';
    os << "old_acc: " << fmt(old_acc) << '\n';
    os << "new_acc: " << fmt(new_acc) << '\n';
    os << "estimated_k: " << estimated_k << '\n';
    os << "k_degenerate: " << (k_degenerate ? 1 : 0) << '\n';
    os << "silhouette: " << fmt(silhouette_score) << '\n';
    os << "icd: " << fmt(icd) << '\n';
    os << "icv: " << fmt(icv) << '\n';
    for (const auto& [label, acc] : per_class) {
        os << "class_acc " << label << ": " << fmt(acc) << '\n';
    }
    return os.str();
}

EvalReport evaluate(const TrainedModel& model, const FeatureDataset& target,
                    const std::vector<std::string>& known_classes, const EvalOptions& opts) {
    if (target.rows.empty()) throw DataError("evaluate: empty target dataset");

    const Eigen::MatrixXd feats = model.embed_dataset(target);
    std::vector<std::string> truth(target.rows.size());
    std::vector<std::string> domains(target.rows.size());
    for (std::size_t i = 0; i < target.rows.size(); ++i) {
        truth[i] = target.rows[i].label;
        domains[i] = target.rows[i].domain_id;
    }

    EvalReport rep;
    int k = opts.fixed_k;
    if (k <= 0) {
        const int k_min = std::max<int>(2, static_cast<int>(known_classes.size()));
        const KEstimate est =
            estimate_k(feats, k_min, std::max(opts.k_max, k_min), opts.seed, opts.k_mode);
        k = est.k;
        rep.k_degenerate = est.degenerate;
    }
    rep.estimated_k = k;

    const ClusterAssignment asg = kmeans(feats, k, opts.seed);
    const std::set<std::string> old_set(known_classes.begin(), known_classes.end());
    const AccuracyReport acc = hungarian_accuracy(asg.labels, truth, old_set);
    rep.all_acc = acc.all;
    rep.old_acc = acc.old_acc;
    rep.new_acc = acc.new_acc;
    for (const auto& [label, a] : acc.per_class) rep.per_class.emplace_back(label, a);

    std::vector<int> distinct(asg.labels);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    rep.silhouette_score = distinct.size() >= 2 ? silhouette(feats, asg.labels) : 0.0;

    if (target.unique_labels().size() >= 2) {
        const auto [icd, icv] = icd_icv(feats, truth, domains);
        rep.icd = icd;
        rep.icv = icv;
    }
    return rep;
}

}  // namespace hidisc
