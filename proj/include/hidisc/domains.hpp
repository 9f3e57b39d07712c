#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "hidisc/dataset.hpp"

namespace hidisc {

// Gaussian summary of a feature distribution.
struct DomainStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;  // symmetric PSD (clipped)
    long count = 0;
};

// Mean + covariance with the n-1 denominator. Requires >= 2 rows.
DomainStats fit_stats(const Eigen::MatrixXd& features);
DomainStats fit_stats(const FeatureDataset& data);

// Frechet distance between Gaussian summaries:
//   |mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa^{1/2} Sb Sa^{1/2})^{1/2}).
// Small negative residue (>= -1e-6) is clipped to 0; worse is a NumericError.
double fid(const DomainStats& a, const DomainStats& b);

struct DomainScoreTable {
    std::vector<std::string> ids;      // synthetic domain ids
    Eigen::VectorXd source_fid;        // FID(source, synth_s)
    Eigen::MatrixXd pair_fid;          // symmetric, zero diagonal
    Eigen::VectorXd scores;
};

// Score(s) = (1/(M-1)) sum_{l != s} [ FID(source, s) + FID(s, l) ].
DomainScoreTable score_from_fids(const Eigen::VectorXd& source_fid,
                                 const Eigen::MatrixXd& pair_fid,
                                 std::vector<std::string> ids);

// Fits nothing; consumes precomputed stats. Requires >= 2 synthetic domains.
DomainScoreTable diversity_score(const DomainStats& source,
                                 const std::vector<DomainStats>& synths,
                                 std::vector<std::string> ids = {});

// Indices of the k top-scoring domains; ties break toward the lower id.
std::vector<int> select_top_domains(const DomainScoreTable& table, int k);

// Feature-space stand-in for the synthetic-domain pipeline: classes sit on
// the leaves of a random binary tree (random-walk means, so sibling classes
// are closer), each domain applies an affine perturbation, and samples add
// i.i.d. Gaussian noise. Domain 0 is the untransformed base.
struct SimulateSpec {
    int n_classes = 7;
    int n_domains = 3;
    int dim = 16;
    int per_class = 50;      // samples per class per domain
    double tree_step = 1.0;  // scale of the root-to-leaf walk
    double noise = 0.1;      // within-class standard deviation
    double shift_mix = 0.0;  // skew-symmetric mixing magnitude
    double shift_bias = 0.0;
    double shift_scale = 0.0;
    std::uint64_t seed = 0;
};

FeatureDataset simulate_domains(const SimulateSpec& spec);

}  // namespace hidisc
