#include "hidisc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "hidisc/errors.hpp"

namespace hidisc {

namespace {

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

void validate_token(const std::string& tok, const char* what) {
    if (tok.empty()) throw DataError(std::string("feature file: empty ") + what);
    if (tok.find(',') != std::string::npos || tok.find('\n') != std::string::npos) {
        throw DataError(std::string("feature file: ") + what + " must not contain commas");
    }
}

}  // namespace

std::vector<std::string> FeatureDataset::unique_labels() const {
    std::vector<std::string> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.label);
    return sorted_unique(std::move(v));
}

std::vector<std::string> FeatureDataset::unique_domains() const {
    std::vector<std::string> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.domain_id);
    return sorted_unique(std::move(v));
}

FeatureDataset FeatureDataset::filter_labels(const std::vector<std::string>& keep) const {
    const std::set<std::string> keep_set(keep.begin(), keep.end());
    FeatureDataset out;
    out.dim = dim;
    out.known_classes = known_classes;
    for (const auto& r : rows) {
        if (keep_set.count(r.label)) out.rows.push_back(r);
    }
    return out;
}

FeatureDataset FeatureDataset::filter_domains(const std::vector<std::string>& keep) const {
    const std::set<std::string> keep_set(keep.begin(), keep.end());
    FeatureDataset out;
    out.dim = dim;
    out.known_classes = known_classes;
    for (const auto& r : rows) {
        if (keep_set.count(r.domain_id)) out.rows.push_back(r);
    }
    return out;
}

Eigen::MatrixXd FeatureDataset::feature_matrix() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].features.transpose();
    return m;
}

void FeatureDataset::append(const FeatureDataset& other) {
    if (rows.empty()) {
        dim = other.dim;
    } else if (other.dim != dim) {
        throw DataError("feature datasets have mismatched dimensions");
    }
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

FeatureDataset FeatureDataset::read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open feature file '" + path + "'");
    std::string header;
    if (!std::getline(is, header)) throw DataError("feature file '" + path + "' is empty");

    long n = -1;
    int d = -1;
    {
        std::istringstream hs(header);
        std::string magic, version, tok;
        hs >> magic >> version;
        if (magic != "HIDISC-FEATURES" || version != "v1") {
            throw DataError("feature file '" + path + "' has an unrecognized header");
        }
        while (hs >> tok) {
            if (tok.rfind("n=", 0) == 0) n = std::strtol(tok.c_str() + 2, nullptr, 10);
            else if (tok.rfind("d=", 0) == 0) d = static_cast<int>(std::strtol(tok.c_str() + 2, nullptr, 10));
            else throw DataError("feature file '" + path + "': unknown header field '" + tok + "'");
        }
    }
    if (n < 0 || d <= 0) throw DataError("feature file '" + path + "': invalid n/d header");

    FeatureDataset out;
    out.dim = d;
    out.rows.reserve(static_cast<std::size_t>(n));
    std::string line;
    long line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        FeatureRow row;
        std::size_t start = 0;
        std::vector<std::string> fields;
        while (true) {
            const std::size_t pos = line.find(',', start);
            if (pos == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, pos - start));
            start = pos + 1;
        }
        if (static_cast<int>(fields.size()) != d + 2) {
            throw DataError("feature file '" + path + "' line " + std::to_string(line_no) +
                            ": expected " + std::to_string(d + 2) + " fields");
        }
        row.domain_id = fields[0];
        row.label = fields[1];
        validate_token(row.domain_id, "domain id");
        validate_token(row.label, "label");
        row.features.resize(d);
        for (int j = 0; j < d; ++j) {
            char* end = nullptr;
            row.features(j) = std::strtod(fields[j + 2].c_str(), &end);
            if (end == fields[j + 2].c_str() || !std::isfinite(row.features(j))) {
                throw DataError("feature file '" + path + "' line " + std::to_string(line_no) +
                                ": bad feature value");
            }
        }
        out.rows.push_back(std::move(row));
    }
    if (static_cast<long>(out.rows.size()) != n) {
        throw DataError("feature file '" + path + "': row count does not match header");
    }
    return out;
}

void FeatureDataset::write_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);  // LF endings everywhere
    if (!os) throw DataError("cannot write feature file '" + path + "'");
    os << "HIDISC-FEATURES v1 n=" << rows.size() << " d=" << dim << '\n';
    char buf[64];
    for (const auto& r : rows) {
        validate_token(r.domain_id, "domain id");
        validate_token(r.label, "label");
        if (r.features.size() != dim) throw DataError("feature row has wrong dimension");
        os << r.domain_id << ',' << r.label;
        for (int j = 0; j < dim; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", r.features(j));
            os << ',' << buf;
        }
        os << '\n';
    }
    if (!os) throw DataError("write failed for feature file '" + path + "'");
}

}  // namespace hidisc
