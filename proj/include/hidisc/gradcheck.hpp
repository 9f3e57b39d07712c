#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hidisc {

struct CheckResult {
    std::string name;
    double worst_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Relative error with an absolute floor so near-zero gradients compare sanely.
double rel_err(double analytic, double numeric);

// Central difference (f(x+h) - f(x-h)) / 2h of a scalar function of one
// perturbed coordinate.
double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5);

// Identity suites: exp/log round trips, Mobius laws, metric axioms, the
// near-flat limit, ball membership, and Tangent CutMix validity.
std::vector<CheckResult> run_inverse_map_checks(std::uint64_t seed);

// Finite-difference suites for every analytic gradient, including the
// end-to-end batch objective on a tiny head.
std::vector<CheckResult> run_gradient_checks(std::uint64_t seed);

// Everything; used by the gradcheck command.
std::vector<CheckResult> run_all_checks(std::uint64_t seed);

}  // namespace hidisc
