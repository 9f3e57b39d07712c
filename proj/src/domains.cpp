#include "hidisc/domains.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "hidisc/errors.hpp"
#include "hidisc/rng.hpp"

namespace hidisc {

namespace {

constexpr double kEigClip = -1e-8;
constexpr double kResidueTol = 1e-6;

// Eigendecompose a symmetrized matrix and return V * f(L) * V^T.
Eigen::MatrixXd sym_apply(const Eigen::MatrixXd& m, double (*f)(double), const char* what) {
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw NumericError(std::string(what) + ": eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    const double scale = std::max(1.0, std::abs(ev.maxCoeff()));
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < kResidueTol * -scale) {
            throw NumericError(std::string(what) + ": matrix is not PSD within tolerance");
        }
        ev(i) = f(std::max(ev(i), 0.0));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double sqrt_clip(double x) { return std::sqrt(x); }

}  // namespace

DomainStats fit_stats(const Eigen::MatrixXd& features) {
    const Eigen::Index n = features.rows();
    if (n < 2) throw DataError("fit_stats: need at least 2 rows");
    DomainStats s;
    s.count = static_cast<long>(n);
    s.mean = features.colwise().mean();
    const Eigen::MatrixXd centered = features.rowwise() - s.mean.transpose();
    s.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    s.cov = 0.5 * (s.cov + s.cov.transpose());
    return s;
}

DomainStats fit_stats(const FeatureDataset& data) {
    return fit_stats(data.feature_matrix());
}

double fid(const DomainStats& a, const DomainStats& b) {
    if (a.mean.size() != b.mean.size()) throw DataError("fid: dimension mismatch");
    // PSD check + clip on both inputs.
    auto check = [](const Eigen::MatrixXd& cov, const char* what) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
        if (es.info() != Eigen::Success) throw NumericError("fid: eigendecomposition failed");
        Eigen::VectorXd ev = es.eigenvalues();
        const double scale = std::max(1.0, std::abs(ev.maxCoeff()));
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            if (ev(i) < kEigClip * scale) throw NumericError(std::string(what) + ": covariance not PSD");
            ev(i) = std::max(ev(i), 0.0);
        }
        return Eigen::MatrixXd(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
    };
    const Eigen::MatrixXd ca = check(a.cov, "fid(a)");
    const Eigen::MatrixXd cb = check(b.cov, "fid(b)");

    const Eigen::MatrixXd sqrt_a = sym_apply(ca, sqrt_clip, "fid");
    const Eigen::MatrixXd inner = sqrt_a * cb * sqrt_a;
    const Eigen::MatrixXd sqrt_inner = sym_apply(inner, sqrt_clip, "fid");

    double value = (a.mean - b.mean).squaredNorm() + ca.trace() + cb.trace() - 2.0 * sqrt_inner.trace();
    if (value < 0.0) {
        if (value < -kResidueTol) throw NumericError("fid: negative distance beyond tolerance");
        value = 0.0;
    }
    return value;
}

DomainScoreTable score_from_fids(const Eigen::VectorXd& source_fid,
                                 const Eigen::MatrixXd& pair_fid,
                                 std::vector<std::string> ids) {
    const Eigen::Index m = source_fid.size();
    if (m < 2) throw ConfigError("diversity score: need at least 2 synthetic domains");
    if (pair_fid.rows() != m || pair_fid.cols() != m) {
        throw ConfigError("diversity score: FID matrix shape mismatch");
    }
    DomainScoreTable t;
    if (ids.empty()) {
        for (Eigen::Index i = 0; i < m; ++i) ids.push_back("dom" + std::to_string(i));
    }
    if (static_cast<Eigen::Index>(ids.size()) != m) {
        throw ConfigError("diversity score: id count mismatch");
    }
    t.ids = std::move(ids);
    t.source_fid = source_fid;
    t.pair_fid = pair_fid;
    t.scores.resize(m);
    for (Eigen::Index s = 0; s < m; ++s) {
        double acc = 0.0;
        for (Eigen::Index l = 0; l < m; ++l) {
            if (l == s) continue;
            acc += source_fid(s) + pair_fid(s, l);
        }
        t.scores(s) = acc / static_cast<double>(m - 1);
    }
    return t;
}

DomainScoreTable diversity_score(const DomainStats& source,
                                 const std::vector<DomainStats>& synths,
                                 std::vector<std::string> ids) {
    const Eigen::Index m = static_cast<Eigen::Index>(synths.size());
    if (m < 2) throw ConfigError("diversity score: need at least 2 synthetic domains");
    Eigen::VectorXd source_fid(m);
    Eigen::MatrixXd pair_fid = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index s = 0; s < m; ++s) source_fid(s) = fid(source, synths[s]);
    for (Eigen::Index s = 0; s < m; ++s) {
        for (Eigen::Index l = s + 1; l < m; ++l) {
            const double v = fid(synths[s], synths[l]);
            pair_fid(s, l) = v;
            pair_fid(l, s) = v;
        }
    }
    return score_from_fids(source_fid, pair_fid, std::move(ids));
}

std::vector<int> select_top_domains(const DomainScoreTable& table, int k) {
    const int m = static_cast<int>(table.scores.size());
    if (k < 0 || k > m) throw ConfigError("select_top_domains: k out of range");
    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (table.scores(a) != table.scores(b)) return table.scores(a) > table.scores(b);
        return a < b;
    });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

namespace {

// Recursive random split; leaves receive the accumulated walk position.
void assign_means(std::vector<int> classes, const Eigen::VectorXd& center, int depth,
                  double step, Rng& rng, std::vector<Eigen::VectorXd>& means) {
    if (classes.size() == 1) {
        means[static_cast<std::size_t>(classes[0])] = center;
        return;
    }
    rng.shuffle(classes);
    const std::size_t half = classes.size() / 2;
    std::vector<int> left(classes.begin(), classes.begin() + static_cast<long>(half));
    std::vector<int> right(classes.begin() + static_cast<long>(half), classes.end());
    const double scale = step * std::pow(0.6, depth) / std::sqrt(static_cast<double>(center.size()));
    for (auto* side : {&left, &right}) {
        Eigen::VectorXd offset(center.size());
        for (Eigen::Index i = 0; i < offset.size(); ++i) offset(i) = scale * rng.normal();
        assign_means(*side, center + offset, depth + 1, step, rng, means);
    }
}

struct DomainTransform {
    Eigen::MatrixXd mix;     // I + shift_mix * skew
    Eigen::VectorXd scale;   // per-coordinate
    Eigen::VectorXd bias;
};

DomainTransform draw_transform(int dim, const SimulateSpec& spec, Rng& rng, bool identity) {
    DomainTransform t;
    t.mix = Eigen::MatrixXd::Identity(dim, dim);
    t.scale = Eigen::VectorXd::Ones(dim);
    t.bias = Eigen::VectorXd::Zero(dim);
    if (identity) return t;
    Eigen::MatrixXd g(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
    }
    const Eigen::MatrixXd skew = 0.5 * (g - g.transpose()) / std::sqrt(static_cast<double>(dim));
    t.mix += spec.shift_mix * skew;
    for (int i = 0; i < dim; ++i) t.scale(i) = std::exp(spec.shift_scale * rng.normal());
    for (int i = 0; i < dim; ++i) t.bias(i) = spec.shift_bias * rng.normal();
    return t;
}

}  // namespace

FeatureDataset simulate_domains(const SimulateSpec& spec) {
    if (spec.n_classes < 1) throw ConfigError("simulate_domains: invalid class count");
    if (spec.n_domains < 1) throw ConfigError("simulate_domains: invalid domain count");
    if (spec.dim < 1) throw ConfigError("simulate_domains: invalid dimension");
    if (spec.per_class < 1) throw ConfigError("simulate_domains: invalid per-class count");
    if (spec.noise < 0.0 || spec.tree_step < 0.0 || spec.shift_mix < 0.0 ||
        spec.shift_bias < 0.0 || spec.shift_scale < 0.0) {
        throw ConfigError("simulate_domains: magnitudes must be nonnegative");
    }

    Rng rng(mix_seed(spec.seed, 0xd0));

    std::vector<Eigen::VectorXd> means(static_cast<std::size_t>(spec.n_classes));
    std::vector<int> all(static_cast<std::size_t>(spec.n_classes));
    std::iota(all.begin(), all.end(), 0);
    assign_means(all, Eigen::VectorXd::Zero(spec.dim), 0, spec.tree_step, rng, means);

    std::vector<DomainTransform> transforms;
    transforms.reserve(static_cast<std::size_t>(spec.n_domains));
    for (int t = 0; t < spec.n_domains; ++t) {
        transforms.push_back(draw_transform(spec.dim, spec, rng, t == 0));
    }

    FeatureDataset out;
    out.dim = spec.dim;
    out.rows.reserve(static_cast<std::size_t>(spec.n_domains) * spec.n_classes * spec.per_class);
    for (int t = 0; t < spec.n_domains; ++t) {
        for (int k = 0; k < spec.n_classes; ++k) {
            for (int i = 0; i < spec.per_class; ++i) {
                Eigen::VectorXd raw = means[static_cast<std::size_t>(k)];
                for (Eigen::Index j = 0; j < raw.size(); ++j) raw(j) += spec.noise * rng.normal();
                FeatureRow row;
                row.domain_id = "dom" + std::to_string(t);
                row.label = "class" + std::to_string(k);
                row.features = transforms[static_cast<std::size_t>(t)].mix *
                                   (transforms[static_cast<std::size_t>(t)].scale.asDiagonal() * raw) +
                               transforms[static_cast<std::size_t>(t)].bias;
                out.rows.push_back(std::move(row));
            }
        }
    }
    return out;
}

}  // namespace hidisc
