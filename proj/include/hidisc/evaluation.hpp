#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace hidisc {

struct ClusterAssignment {
    std::vector<int> labels;
    Eigen::MatrixXd centroids;  // k x d
    double inertia = 0.0;
    int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding; deterministic given seed. Ties in
// the assignment step go to the lowest centroid index; empty clusters keep
// their previous centroid.
ClusterAssignment kmeans(const Eigen::MatrixXd& features, int k, std::uint64_t seed,
                         int max_iter = 300);

// Min-cost assignment (Kuhn-Munkres with potentials, O(n^3)) on a square cost
// matrix; returns the matched column per row.
std::vector<int> hungarian_min_cost(const Eigen::MatrixXd& cost);

struct AccuracyReport {
    double all = 0.0;
    double old_acc = 0.0;
    double new_acc = 0.0;
    long n_old = 0;
    long n_new = 0;
    std::map<std::string, double> per_class;
};

// Global Hungarian matching between predicted clusters and true classes; the
// three accuracies are fractions of matched instances under that single
// matching.
AccuracyReport hungarian_accuracy(const std::vector<int>& pred,
                                  const std::vector<std::string>& truth,
                                  const std::set<std::string>& old_set);

// Mean silhouette with Euclidean distances; singleton clusters score 0.
// Throws ConfigError when fewer than 2 distinct clusters are present.
double silhouette(const Eigen::MatrixXd& features, const std::vector<int>& assignment);

enum class KSearchMode { brent, sweep };

struct KEstimate {
    int k = 0;
    bool degenerate = false;   // all-identical features; k_min returned
    int evaluations = 0;
    KSearchMode mode = KSearchMode::brent;
};

// Maximizes the silhouette of kmeans(features, k) over integer k. Brent mode
// runs a bounded scalar minimizer on the negated score (rounded to integers,
// memoized) followed by a +-1 polish; sweep mode evaluates the whole range
// (allowed for ranges up to 64). Ties break toward smaller k.
KEstimate estimate_k(const Eigen::MatrixXd& features, int k_min, int k_max, std::uint64_t seed,
                     KSearchMode mode = KSearchMode::brent);

// ICD: mean pairwise cosine distance between class centroids. ICV: mean over
// classes of the standard deviation of cross-domain within-class cosine
// similarities (classes without cross-domain pairs contribute 0).
std::pair<double, double> icd_icv(const Eigen::MatrixXd& features,
                                  const std::vector<std::string>& labels,
                                  const std::vector<std::string>& domains);

enum class SimilaritySpace { euclidean, hyperbolic };

struct ClassSimilarity {
    std::string label;
    double similarity = 0.0;
    bool skipped = false;  // class missing in one of the two domains
};

// Per-class cosine similarity between the two domains' class-mean
// representations. Requires exactly two distinct domains. Euclidean mode
// l2-normalizes raw features first; hyperbolic mode maps through the exp map
// and compares tangent-space means.
std::vector<ClassSimilarity> cross_domain_class_similarity(
    const Eigen::MatrixXd& features, const std::vector<std::string>& labels,
    const std::vector<std::string>& domains, SimilaritySpace space, double curvature);

}  // namespace hidisc
