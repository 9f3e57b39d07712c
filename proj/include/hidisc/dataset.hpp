#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace hidisc {

struct FeatureRow {
    std::string domain_id;
    std::string label;
    Eigen::VectorXd features;
};

// Line-oriented feature file:
//   HIDISC-FEATURES v1 n=<n> d=<d>
//   <domain_id>,<label>,<f0>,...,<f{d-1}>
// Values are printed with 17 significant digits so write/read round-trips.
struct FeatureDataset {
    std::vector<FeatureRow> rows;
    int dim = 0;
    std::vector<std::string> known_classes;  // assigned by config, not serialized

    std::size_t size() const { return rows.size(); }
    std::vector<std::string> unique_labels() const;
    std::vector<std::string> unique_domains() const;
    FeatureDataset filter_labels(const std::vector<std::string>& keep) const;
    FeatureDataset filter_domains(const std::vector<std::string>& keep) const;
    Eigen::MatrixXd feature_matrix() const;  // n x d

    void append(const FeatureDataset& other);

    static FeatureDataset read_file(const std::string& path);
    void write_file(const std::string& path) const;
};

}  // namespace hidisc
