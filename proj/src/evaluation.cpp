#include "hidisc/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "hidisc/errors.hpp"
#include "hidisc/geometry.hpp"
#include "hidisc/rng.hpp"

namespace hidisc {

ClusterAssignment kmeans(const Eigen::MatrixXd& features, int k, std::uint64_t seed,
                         int max_iter) {
    const Eigen::Index n = features.rows();
    if (k < 1) throw ConfigError("kmeans: k must be positive");
    if (n < k) throw ConfigError("kmeans: fewer samples than clusters");

    Rng rng(seed);
    Eigen::MatrixXd centers(k, features.cols());
    std::vector<bool> chosen(static_cast<std::size_t>(n), false);

    // k-means++ seeding.
    {
        const Eigen::Index first = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
        centers.row(0) = features.row(first);
        chosen[static_cast<std::size_t>(first)] = true;
        Eigen::VectorXd dist2(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            dist2(i) = (features.row(i) - centers.row(0)).squaredNorm();
        }
        for (int t = 1; t < k; ++t) {
            const double total = dist2.sum();
            Eigen::Index pick = -1;
            if (total > 0.0) {
                const double r = rng.uniform() * total;
                double acc = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    acc += dist2(i);
                    if (acc >= r) {
                        pick = i;
                        break;
                    }
                }
                if (pick < 0) pick = n - 1;
            } else {
                // All remaining mass is zero (duplicate points): first unchosen index.
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (!chosen[static_cast<std::size_t>(i)]) {
                        pick = i;
                        break;
                    }
                }
                if (pick < 0) pick = 0;
            }
            centers.row(t) = features.row(pick);
            chosen[static_cast<std::size_t>(pick)] = true;
            for (Eigen::Index i = 0; i < n; ++i) {
                dist2(i) = std::min(dist2(i), (features.row(i) - centers.row(t)).squaredNorm());
            }
        }
    }

    ClusterAssignment out;
    out.labels.assign(static_cast<std::size_t>(n), 0);
    std::vector<int> prev(static_cast<std::size_t>(n), -1);
    for (int it = 0; it < max_iter; ++it) {
        // Assignment step; ties go to the lowest index.
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int best_k = 0;
            for (int c = 0; c < k; ++c) {
                const double d = (features.row(i) - centers.row(c)).squaredNorm();
                if (d < best) {
                    best = d;
                    best_k = c;
                }
            }
            out.labels[static_cast<std::size_t>(i)] = best_k;
        }
        out.iterations = it + 1;
        if (out.labels == prev) break;
        prev = out.labels;

        // Update step; empty clusters keep their previous centroid.
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, features.cols());
        std::vector<long> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(out.labels[static_cast<std::size_t>(i)]) += features.row(i);
            counts[static_cast<std::size_t>(out.labels[static_cast<std::size_t>(i)])]++;
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            }
        }
    }

    out.centroids = centers;
    out.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        out.inertia += (features.row(i) - centers.row(out.labels[static_cast<std::size_t>(i)])).squaredNorm();
    }
    return out;
}

std::vector<int> hungarian_min_cost(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw ConfigError("hungarian_min_cost: matrix must be square");
    constexpr double kInf = std::numeric_limits<double>::infinity();

    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
        std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> match(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j) {
        if (p[static_cast<std::size_t>(j)] > 0) match[static_cast<std::size_t>(p[static_cast<std::size_t>(j)]) - 1] = j - 1;
    }
    return match;
}

AccuracyReport hungarian_accuracy(const std::vector<int>& pred,
                                  const std::vector<std::string>& truth,
                                  const std::set<std::string>& old_set) {
    if (pred.empty() || pred.size() != truth.size()) {
        throw DataError("hungarian_accuracy: empty or mismatched label arrays");
    }
    // Compact ids for clusters and classes.
    std::vector<int> cluster_ids(pred);
    std::sort(cluster_ids.begin(), cluster_ids.end());
    cluster_ids.erase(std::unique(cluster_ids.begin(), cluster_ids.end()), cluster_ids.end());
    std::vector<std::string> class_ids(truth);
    std::sort(class_ids.begin(), class_ids.end());
    class_ids.erase(std::unique(class_ids.begin(), class_ids.end()), class_ids.end());

    const int np = static_cast<int>(cluster_ids.size());
    const int nt = static_cast<int>(class_ids.size());
    const int n_side = std::max(np, nt);

    auto cluster_index = [&](int c) {
        return static_cast<int>(std::lower_bound(cluster_ids.begin(), cluster_ids.end(), c) -
                                cluster_ids.begin());
    };
    auto class_index = [&](const std::string& s) {
        return static_cast<int>(std::lower_bound(class_ids.begin(), class_ids.end(), s) -
                                class_ids.begin());
    };

    Eigen::MatrixXd contingency = Eigen::MatrixXd::Zero(n_side, n_side);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        contingency(cluster_index(pred[i]), class_index(truth[i])) += 1.0;
    }

    const std::vector<int> match = hungarian_min_cost(-contingency);

    AccuracyReport rep;
    long correct_all = 0, correct_old = 0, correct_new = 0;
    std::map<std::string, long> class_total, class_correct;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int pc = cluster_index(pred[i]);
        const int tc = class_index(truth[i]);
        const bool ok = match[static_cast<std::size_t>(pc)] == tc;
        const bool is_old = old_set.count(truth[i]) > 0;
        class_total[truth[i]]++;
        if (ok) {
            correct_all++;
            class_correct[truth[i]]++;
        }
        if (is_old) {
            rep.n_old++;
            if (ok) correct_old++;
        } else {
            rep.n_new++;
            if (ok) correct_new++;
        }
    }
    const double n = static_cast<double>(pred.size());
    rep.all = static_cast<double>(correct_all) / n;
    rep.old_acc = rep.n_old > 0 ? static_cast<double>(correct_old) / static_cast<double>(rep.n_old) : 0.0;
    rep.new_acc = rep.n_new > 0 ? static_cast<double>(correct_new) / static_cast<double>(rep.n_new) : 0.0;
    for (const auto& [label, total] : class_total) {
        rep.per_class[label] = static_cast<double>(class_correct[label]) / static_cast<double>(total);
    }
    return rep;
}

double silhouette(const Eigen::MatrixXd& features, const std::vector<int>& assignment) {
    const Eigen::Index n = features.rows();
    if (static_cast<std::size_t>(n) != assignment.size()) {
        throw ConfigError("silhouette: assignment length mismatch");
    }
    std::vector<int> clusters(assignment);
    std::sort(clusters.begin(), clusters.end());
    clusters.erase(std::unique(clusters.begin(), clusters.end()), clusters.end());
    if (clusters.size() < 2) throw ConfigError("silhouette: need at least 2 clusters");

    const int kc = static_cast<int>(clusters.size());
    auto cluster_index = [&](int c) {
        return static_cast<int>(std::lower_bound(clusters.begin(), clusters.end(), c) - clusters.begin());
    };
    std::vector<long> counts(static_cast<std::size_t>(kc), 0);
    std::vector<int> cidx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        cidx[static_cast<std::size_t>(i)] = cluster_index(assignment[static_cast<std::size_t>(i)]);
        counts[static_cast<std::size_t>(cidx[static_cast<std::size_t>(i)])]++;
    }

    double total = 0.0;
    std::vector<double> sum_to_cluster(static_cast<std::size_t>(kc));
    for (Eigen::Index i = 0; i < n; ++i) {
        const int ci = cidx[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(ci)] <= 1) continue;  // singleton scores 0
        std::fill(sum_to_cluster.begin(), sum_to_cluster.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            sum_to_cluster[static_cast<std::size_t>(cidx[static_cast<std::size_t>(j)])] +=
                (features.row(i) - features.row(j)).norm();
        }
        const double a = sum_to_cluster[static_cast<std::size_t>(ci)] /
                         static_cast<double>(counts[static_cast<std::size_t>(ci)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < kc; ++c) {
            if (c == ci || counts[static_cast<std::size_t>(c)] == 0) continue;
            b = std::min(b, sum_to_cluster[static_cast<std::size_t>(c)] /
                                static_cast<double>(counts[static_cast<std::size_t>(c)]));
        }
        const double denom = std::max(a, b);
        if (std::isfinite(b) && denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

namespace {

// Bounded scalar minimization (golden section with parabolic steps), applied
// to the negated silhouette rounded to integer k with memoization.
template <typename F>
void fminbound(F&& f, double a, double b, double xatol, int max_iter) {
    const double golden_mean = 0.5 * (3.0 - std::sqrt(5.0));
    const double sqrt_eps = std::sqrt(2.2e-16);
    double fulc = a + golden_mean * (b - a);
    double nfc = fulc, xf = fulc;
    double rat = 0.0, e = 0.0;
    double fx = f(xf);
    double ffulc = fx, fnfc = fx;
    double xm = 0.5 * (a + b);
    double tol1 = sqrt_eps * std::abs(xf) + xatol / 3.0;
    double tol2 = 2.0 * tol1;

    int iters = 0;
    while (std::abs(xf - xm) > (tol2 - 0.5 * (b - a))) {
        bool golden = true;
        if (std::abs(e) > tol1) {
            double r = (xf - nfc) * (fx - ffulc);
            double q = (xf - fulc) * (fx - fnfc);
            double p = (xf - fulc) * q - (xf - nfc) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::abs(q);
            const double r_old = e;
            e = rat;
            if (std::abs(p) < std::abs(0.5 * q * r_old) && p > q * (a - xf) && p < q * (b - xf)) {
                rat = p / q;
                golden = false;
                const double x_try = xf + rat;
                if ((x_try - a) < tol2 || (b - x_try) < tol2) {
                    const double si = (xm - xf >= 0.0) ? 1.0 : -1.0;
                    rat = tol1 * si;
                }
            }
        }
        if (golden) {
            e = (xf >= xm) ? a - xf : b - xf;
            rat = golden_mean * e;
        }
        const double si = (rat >= 0.0) ? 1.0 : -1.0;
        const double x = xf + si * std::max(std::abs(rat), tol1);
        const double fu = f(x);
        if (fu <= fx) {
            if (x >= xf) a = xf; else b = xf;
            fulc = nfc; ffulc = fnfc;
            nfc = xf; fnfc = fx;
            xf = x; fx = fu;
        } else {
            if (x < xf) a = x; else b = x;
            if (fu <= fnfc || nfc == xf) {
                fulc = nfc; ffulc = fnfc;
                nfc = x; fnfc = fu;
            } else if (fu <= ffulc || fulc == xf || fulc == nfc) {
                fulc = x; ffulc = fu;
            }
        }
        xm = 0.5 * (a + b);
        tol1 = sqrt_eps * std::abs(xf) + xatol / 3.0;
        tol2 = 2.0 * tol1;
        if (++iters >= max_iter) break;
    }
}

}  // namespace

KEstimate estimate_k(const Eigen::MatrixXd& features, int k_min, int k_max, std::uint64_t seed,
                     KSearchMode mode) {
    const Eigen::Index n = features.rows();
    if (k_min < 2) throw ConfigError("estimate_k: k_min must be at least 2");
    const int k_hi = std::min<int>(k_max, static_cast<int>(n));
    if (k_hi < k_min) throw ConfigError("estimate_k: empty k range");

    KEstimate est;
    est.mode = mode;

    // Degenerate input: every row identical.
    bool degenerate = true;
    for (Eigen::Index i = 1; i < n && degenerate; ++i) {
        if ((features.row(i) - features.row(0)).norm() > 1e-12) degenerate = false;
    }
    if (degenerate) {
        est.k = k_min;
        est.degenerate = true;
        return est;
    }

    std::map<int, double> memo;
    auto score_at = [&](int k) {
        const auto it = memo.find(k);
        if (it != memo.end()) return it->second;
        const ClusterAssignment asg = kmeans(features, k, seed);
        std::vector<int> distinct(asg.labels);
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        const double s = distinct.size() < 2 ? -1.0 : silhouette(features, asg.labels);
        memo[k] = s;
        est.evaluations++;
        return s;
    };

    if (mode == KSearchMode::sweep) {
        if (k_hi - k_min > 64) throw ConfigError("estimate_k: sweep mode limited to ranges of 64");
        for (int k = k_min; k <= k_hi; ++k) score_at(k);
    } else {
        score_at(k_min);
        score_at(k_hi);
        if (k_hi - k_min > 1) {
            fminbound([&](double x) { return -score_at(static_cast<int>(std::lround(
                                          std::clamp(x, static_cast<double>(k_min),
                                                     static_cast<double>(k_hi))))); },
                      static_cast<double>(k_min), static_cast<double>(k_hi), 0.5, 100);
        }
        // Local polish around the best memoized integer.
        auto best_it = memo.begin();
        for (auto it = memo.begin(); it != memo.end(); ++it) {
            if (it->second > best_it->second) best_it = it;
        }
        int k_cur = best_it->first;
        while (k_cur - 1 >= k_min && score_at(k_cur - 1) >= memo[k_cur]) --k_cur;
        while (k_cur + 1 <= k_hi && score_at(k_cur + 1) > memo[k_cur]) ++k_cur;
    }

    int best_k = k_min;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& [k, s] : memo) {
        if (s > best_score) {
            best_score = s;
            best_k = k;
        }
    }
    est.k = best_k;
    return est;
}

namespace {

double cosine_rows(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

}  // namespace

std::pair<double, double> icd_icv(const Eigen::MatrixXd& features,
                                  const std::vector<std::string>& labels,
                                  const std::vector<std::string>& domains) {
    const Eigen::Index n = features.rows();
    if (static_cast<std::size_t>(n) != labels.size() || labels.size() != domains.size()) {
        throw DataError("icd_icv: array length mismatch");
    }
    std::vector<std::string> classes(labels);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() < 2) throw ConfigError("icd_icv: need at least 2 classes");

    const int kc = static_cast<int>(classes.size());
    auto class_index = [&](const std::string& s) {
        return static_cast<int>(std::lower_bound(classes.begin(), classes.end(), s) - classes.begin());
    };

    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(kc, features.cols());
    std::vector<long> counts(static_cast<std::size_t>(kc), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int c = class_index(labels[static_cast<std::size_t>(i)]);
        centroids.row(c) += features.row(i);
        counts[static_cast<std::size_t>(c)]++;
    }
    for (int c = 0; c < kc; ++c) centroids.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

    double icd = 0.0;
    long pairs = 0;
    for (int i = 0; i < kc; ++i) {
        for (int j = i + 1; j < kc; ++j) {
            icd += 1.0 - cosine_rows(centroids.row(i).transpose(), centroids.row(j).transpose());
            pairs++;
        }
    }
    icd /= static_cast<double>(pairs);

    double icv = 0.0;
    for (int c = 0; c < kc; ++c) {
        std::vector<Eigen::Index> members;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (class_index(labels[static_cast<std::size_t>(i)]) == c) members.push_back(i);
        }
        double sum = 0.0, sum2 = 0.0;
        long cnt = 0;
        for (std::size_t a = 0; a < members.size(); ++a) {
            for (std::size_t b = a + 1; b < members.size(); ++b) {
                if (domains[static_cast<std::size_t>(members[a])] ==
                    domains[static_cast<std::size_t>(members[b])]) {
                    continue;
                }
                const double s = cosine_rows(features.row(members[a]).transpose(),
                                             features.row(members[b]).transpose());
                sum += s;
                sum2 += s * s;
                cnt++;
            }
        }
        if (cnt >= 2) {
            const double mean = sum / static_cast<double>(cnt);
            icv += std::sqrt(std::max(0.0, sum2 / static_cast<double>(cnt) - mean * mean));
        }
    }
    icv /= static_cast<double>(kc);
    return {icd, icv};
}

std::vector<ClassSimilarity> cross_domain_class_similarity(
    const Eigen::MatrixXd& features, const std::vector<std::string>& labels,
    const std::vector<std::string>& domains, SimilaritySpace space, double curvature) {
    const Eigen::Index n = features.rows();
    if (static_cast<std::size_t>(n) != labels.size() || labels.size() != domains.size()) {
        throw DataError("cross_domain_class_similarity: array length mismatch");
    }
    std::vector<std::string> domain_ids(domains);
    std::sort(domain_ids.begin(), domain_ids.end());
    domain_ids.erase(std::unique(domain_ids.begin(), domain_ids.end()), domain_ids.end());
    if (domain_ids.size() != 2) {
        throw DataError("cross_domain_class_similarity: exactly two domains required");
    }
    std::vector<std::string> classes(labels);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

    std::vector<ClassSimilarity> out;
    for (const std::string& cls : classes) {
        ClassSimilarity cs;
        cs.label = cls;
        std::array<Eigen::VectorXd, 2> mean_repr;
        std::array<long, 2> count{0, 0};
        for (int d = 0; d < 2; ++d) mean_repr[static_cast<std::size_t>(d)] = Eigen::VectorXd::Zero(features.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            if (labels[static_cast<std::size_t>(i)] != cls) continue;
            const int d = domains[static_cast<std::size_t>(i)] == domain_ids[0] ? 0 : 1;
            Eigen::VectorXd repr = features.row(i).transpose();
            if (space == SimilaritySpace::euclidean) {
                const double nm = repr.norm();
                if (nm > 0.0) repr /= nm;
            } else {
                repr = exp_map0(repr, curvature);
            }
            mean_repr[static_cast<std::size_t>(d)] += repr;
            count[static_cast<std::size_t>(d)]++;
        }
        if (count[0] == 0 || count[1] == 0) {
            cs.skipped = true;
            out.push_back(cs);
            continue;
        }
        for (int d = 0; d < 2; ++d) mean_repr[static_cast<std::size_t>(d)] /= static_cast<double>(count[static_cast<std::size_t>(d)]);
        if (space == SimilaritySpace::hyperbolic) {
            mean_repr[0] = log_map0(clip_to_ball(mean_repr[0], curvature), curvature);
            mean_repr[1] = log_map0(clip_to_ball(mean_repr[1], curvature), curvature);
        }
        cs.similarity = cosine_rows(mean_repr[0], mean_repr[1]);
        out.push_back(cs);
    }
    return out;
}

}  // namespace hidisc
