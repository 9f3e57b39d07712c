#include "hidisc/prototypes.hpp"

#include <cmath>
#include <limits>

#include "hidisc/errors.hpp"
#include "hidisc/rng.hpp"

namespace hidisc {

namespace {

double max_pairwise_cosine(const Eigen::MatrixXd& u) {
    const int k = static_cast<int>(u.rows());
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            best = std::max(best, u.row(i).dot(u.row(j)));
        }
    }
    return best;
}

void renormalize_rows(Eigen::MatrixXd& u) {
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        const double n = u.row(i).norm();
        if (n > 0.0) u.row(i) /= n;
    }
}

}  // namespace

PrototypeSet::PrototypeSet(Eigen::MatrixXd prototypes, std::vector<std::string> class_ids)
    : matrix_(std::move(prototypes)), class_ids_(std::move(class_ids)) {
    if (static_cast<std::size_t>(matrix_.rows()) != class_ids_.size()) {
        throw ConfigError("PrototypeSet: class id count does not match prototype count");
    }
}

int PrototypeSet::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < class_ids_.size(); ++i) {
        if (class_ids_[i] == label) return static_cast<int>(i);
    }
    return -1;
}

Eigen::VectorXd PrototypeSet::prototype_for(const std::string& label) const {
    const int idx = index_of(label);
    if (idx < 0) throw DataError("PrototypeSet: unknown class label '" + label + "'");
    return matrix_.row(idx).transpose();
}

PrototypeSet place_prototypes(int k, int d, std::uint64_t seed,
                              std::vector<std::string> class_ids) {
    if (k < 2) throw ConfigError("place_prototypes: need at least 2 classes");
    if (d < 1 || (d == 1 && k > 2)) {
        throw ConfigError("place_prototypes: unsupported dimension for requested class count");
    }
    if (class_ids.empty()) {
        class_ids.reserve(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) class_ids.push_back("class" + std::to_string(i));
    }
    if (static_cast<int>(class_ids.size()) != k) {
        throw ConfigError("place_prototypes: class id count does not match k");
    }

    Rng rng(seed);
    Eigen::MatrixXd u(k, d);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < d; ++j) u(i, j) = rng.normal();
    }
    renormalize_rows(u);

    if (d == 1) {
        // Only two distinct directions exist; use them directly.
        u(0, 0) = 1.0;
        u(1, 0) = -1.0;
        return PrototypeSet(u, std::move(class_ids));
    }

    constexpr int kSteps = 1000;
    constexpr double kLr = 0.1;
    constexpr double kMomentum = 0.9;
    constexpr double kTemp = 10.0;

    Eigen::MatrixXd best = u;
    double best_cos = max_pairwise_cosine(u);
    Eigen::MatrixXd buf = Eigen::MatrixXd::Zero(k, d);

    for (int step = 0; step < kSteps; ++step) {
        // Smoothed max cosine: (1/T) log sum_{i<j} exp(T <u_i, u_j>).
        double shift = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < k; ++i) {
            for (int j = i + 1; j < k; ++j) {
                shift = std::max(shift, kTemp * u.row(i).dot(u.row(j)));
            }
        }
        double denom = 0.0;
        for (int i = 0; i < k; ++i) {
            for (int j = i + 1; j < k; ++j) {
                denom += std::exp(kTemp * u.row(i).dot(u.row(j)) - shift);
            }
        }
        Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(k, d);
        for (int i = 0; i < k; ++i) {
            for (int j = i + 1; j < k; ++j) {
                const double wij = std::exp(kTemp * u.row(i).dot(u.row(j)) - shift) / denom;
                grad.row(i) += wij * u.row(j);
                grad.row(j) += wij * u.row(i);
            }
        }
        buf = kMomentum * buf + grad;
        u -= kLr * buf;
        renormalize_rows(u);

        const double cur = max_pairwise_cosine(u);
        if (cur < best_cos) {
            best_cos = cur;
            best = u;
        }
    }

    return PrototypeSet(std::move(best), std::move(class_ids));
}

}  // namespace hidisc
