#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace hidisc {

// Fixed ideal prototypes: one unit direction per seen class, immutable after
// construction.
class PrototypeSet {
public:
    PrototypeSet() = default;
    PrototypeSet(Eigen::MatrixXd prototypes, std::vector<std::string> class_ids);

    int size() const { return static_cast<int>(matrix_.rows()); }
    int dim() const { return static_cast<int>(matrix_.cols()); }
    const Eigen::MatrixXd& matrix() const { return matrix_; }
    const std::vector<std::string>& class_ids() const { return class_ids_; }

    // Row for a class label; throws DataError for unknown labels.
    Eigen::VectorXd prototype_for(const std::string& label) const;
    int index_of(const std::string& label) const;  // -1 when missing
    Eigen::VectorXd row(int k) const { return matrix_.row(k).transpose(); }

private:
    Eigen::MatrixXd matrix_;  // K x d, unit-norm rows
    std::vector<std::string> class_ids_;
};

// Places k unit vectors by minimizing a log-sum-exp surrogate of the max
// pairwise cosine: random unit init from `seed`, 1000 momentum-SGD steps
// (lr 0.1, momentum 0.9, temperature 10), renormalized every step. The best
// iterate by true max pairwise cosine is kept, so the result never separates
// worse than the initialization. Deterministic given seed.
PrototypeSet place_prototypes(int k, int d, std::uint64_t seed,
                              std::vector<std::string> class_ids = {});

}  // namespace hidisc
