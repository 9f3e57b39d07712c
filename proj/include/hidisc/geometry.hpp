#pragma once

#include <Eigen/Core>

namespace hidisc {

using Vec = Eigen::VectorXd;

// Interior safety margin: in-ball points are kept at sqrt(c)*|z| <= 1 - kBallEps
// so terms like 1/(1 - c|z|^2) stay bounded.
inline constexpr double kBallEps = 1e-5;
inline constexpr double kCurvatureMin = 1e-6;
inline constexpr double kCurvatureMax = 10.0;

double clamp_curvature(double c);

// Largest embedding norm we allow: min((1 - eps)/sqrt(c), 1 - eps). The second
// bound keeps log(1 - |z|^2) finite independently of c.
double ball_limit(double c);

// Mobius addition a (+)_c b. Output is re-clipped to the interior margin if it
// lands numerically on the boundary. Throws std::invalid_argument on
// non-finite input.
Vec mobius_add(const Vec& a, const Vec& b, double c);

// Geodesic distance (2/sqrt(c)) * atanh(sqrt(c) * |(-a) (+)_c b|).
double distance(const Vec& a, const Vec& b, double c);

// exp map at the origin: tanh(sqrt(c)|v|) * v / (sqrt(c)|v|); origin for v = 0.
Vec exp_map0(const Vec& v, double c);

// log map at the origin: atanh(sqrt(c)|z|) * z / (sqrt(c)|z|); exact inverse of
// exp_map0. Throws std::domain_error if z is on or outside the boundary.
Vec log_map0(const Vec& z, double c);

// Norm clip used on the pre-map feature: identity below radius r, rescale to
// norm r above it.
Vec clip_to_radius(const Vec& v, double r);

// Interior clip to ball_limit(c).
Vec clip_to_ball(const Vec& z, double c);

// --- Analytic gradients -----------------------------------------------------
//
// The *_vjp functions propagate an upstream gradient `w` (dL/d_output) back
// to the inputs, including the curvature. distance_grad returns the gradient
// of the scalar distance directly. At the distance cusp (a == b) the gradient
// is zero by convention.

struct MapGrad {
    Vec gx;
    double gc = 0.0;
};

struct PairGrad {
    Vec ga, gb;
    double gc = 0.0;
};

PairGrad mobius_add_vjp(const Vec& a, const Vec& b, double c, const Vec& w);
PairGrad distance_grad(const Vec& a, const Vec& b, double c);
MapGrad exp_map0_vjp(const Vec& v, double c, const Vec& w);
MapGrad log_map0_vjp(const Vec& z, double c, const Vec& w);
Vec clip_to_radius_vjp(const Vec& v, double r, const Vec& w);
MapGrad clip_to_ball_vjp(const Vec& z, double c, const Vec& w);

namespace detail {

// tanh(x)/x and atanh(x)/x with series fallbacks near zero, plus derivatives.
double tanhc(double x);
double dtanhc(double x);
double atanhc(double x);
double datanhc(double x);

void require_finite(const Vec& v, const char* what);

}  // namespace detail

}  // namespace hidisc
