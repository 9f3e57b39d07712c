#pragma once

#include <Eigen/Core>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>

#include "hidisc/errors.hpp"

namespace hidisc {

// Hexfloat text round-trips doubles bit-exactly; used by checkpoints.
inline std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return std::string(buf);
}

inline double parse_double(const std::string& tok, const char* what) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
        throw DataError(std::string(what) + ": bad numeric token '" + tok + "'");
    }
    return v;
}

inline double read_hex_double(std::istream& is, const char* what) {
    std::string tok;
    if (!(is >> tok)) throw DataError(std::string(what) + ": truncated stream");
    return parse_double(tok, what);
}

inline void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    os << m.rows() << ' ' << m.cols();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << ' ' << hex_double(m(i, j));
    }
    os << '\n';
}

inline Eigen::MatrixXd read_matrix(std::istream& is, const char* what) {
    Eigen::Index rows = 0, cols = 0;
    if (!(is >> rows >> cols)) throw DataError(std::string(what) + ": truncated matrix header");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = read_hex_double(is, what);
    }
    return m;
}

inline void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
    os << v.size();
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << hex_double(v(i));
    os << '\n';
}

inline Eigen::VectorXd read_vector(std::istream& is, const char* what) {
    Eigen::Index n = 0;
    if (!(is >> n)) throw DataError(std::string(what) + ": truncated vector header");
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = read_hex_double(is, what);
    return v;
}

}  // namespace hidisc
