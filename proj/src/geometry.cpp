#include "hidisc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hidisc {

namespace detail {

void require_finite(const Vec& v, const char* what) {
    if (!v.allFinite()) {
        throw std::invalid_argument(std::string(what) + ": non-finite input");
    }
}

double tanhc(double x) {
    const double ax = std::abs(x);
    if (ax < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0;
    }
    return std::tanh(x) / x;
}

double dtanhc(double x) {
    const double ax = std::abs(x);
    if (ax < 1e-4) {
        const double x2 = x * x;
        return x * (-2.0 / 3.0 + 8.0 * x2 / 15.0);
    }
    const double t = std::tanh(x);
    return ((1.0 - t * t) - t / x) / x;
}

double atanhc(double x) {
    const double ax = std::abs(x);
    if (ax < 1e-4) {
        const double x2 = x * x;
        return 1.0 + x2 / 3.0 + x2 * x2 / 5.0;
    }
    return std::atanh(x) / x;
}

double datanhc(double x) {
    const double ax = std::abs(x);
    if (ax < 1e-4) {
        const double x2 = x * x;
        return x * (2.0 / 3.0 + 4.0 * x2 / 5.0);
    }
    return (1.0 / (1.0 - x * x) - std::atanh(x) / x) / x;
}

// Guard against atanh(1) when near-boundary points cancel badly.
constexpr double kArgGuard = 1.0 - 1e-12;

}  // namespace detail

using detail::atanhc;
using detail::datanhc;
using detail::dtanhc;
using detail::require_finite;
using detail::tanhc;

double clamp_curvature(double c) {
    return std::clamp(c, kCurvatureMin, kCurvatureMax);
}

double ball_limit(double c) {
    return std::min((1.0 - kBallEps) / std::sqrt(c), 1.0 - kBallEps);
}

Vec clip_to_radius(const Vec& v, double r) {
    if (r <= 0.0) throw std::invalid_argument("clip_to_radius: r must be positive");
    const double n = v.norm();
    if (n <= r) return v;
    return v * (r / n);
}

Vec clip_to_radius_vjp(const Vec& v, double r, const Vec& w) {
    const double n = v.norm();
    if (n <= r) return w;
    const Vec vhat = v / n;
    return (r / n) * (w - vhat.dot(w) * vhat);
}

Vec clip_to_ball(const Vec& z, double c) {
    return clip_to_radius(z, ball_limit(c));
}

MapGrad clip_to_ball_vjp(const Vec& z, double c, const Vec& w) {
    const double limit = ball_limit(c);
    MapGrad g;
    g.gx = clip_to_radius_vjp(z, limit, w);
    g.gc = 0.0;
    const double n = z.norm();
    // When the active limit is (1 - eps)/sqrt(c) the clipped point moves with c.
    if (n > limit && (1.0 - kBallEps) / std::sqrt(c) < 1.0 - kBallEps) {
        const Vec zhat = z / n;
        const double dlimit_dc = -0.5 * (1.0 - kBallEps) * std::pow(c, -1.5);
        g.gc = w.dot(zhat) * dlimit_dc;
    }
    return g;
}

Vec mobius_add(const Vec& a, const Vec& b, double c) {
    require_finite(a, "mobius_add");
    require_finite(b, "mobius_add");
    const double A = a.squaredNorm();
    const double B = b.squaredNorm();
    const double D = a.dot(b);
    const double alpha = 1.0 + 2.0 * c * D + c * B;
    const double beta = 1.0 - c * A;
    const double den = 1.0 + 2.0 * c * D + c * c * A * B;
    Vec out = (alpha * a + beta * b) / den;
    const double limit = (1.0 - kBallEps) / std::sqrt(c);
    const double n = out.norm();
    if (n > limit) out *= limit / n;
    return out;
}

PairGrad mobius_add_vjp(const Vec& a, const Vec& b, double c, const Vec& w) {
    const double A = a.squaredNorm();
    const double B = b.squaredNorm();
    const double D = a.dot(b);
    const double alpha = 1.0 + 2.0 * c * D + c * B;
    const double beta = 1.0 - c * A;
    const double den = 1.0 + 2.0 * c * D + c * c * A * B;
    const Vec m = (alpha * a + beta * b) / den;

    const double wa = w.dot(a);
    const double wb = w.dot(b);
    const double wm = w.dot(m);

    PairGrad g;
    g.ga = (2.0 * c * wa) * b + alpha * w - (2.0 * c * wb) * a;
    g.ga -= wm * (2.0 * c * b + 2.0 * c * c * B * a);
    g.ga /= den;

    g.gb = (2.0 * c * wa) * (a + b) + beta * w;
    g.gb -= wm * (2.0 * c * a + 2.0 * c * c * A * b);
    g.gb /= den;

    const Vec dm_dc = ((2.0 * D + B) * a - A * b) / den - m * (2.0 * D + 2.0 * c * A * B) / den;
    g.gc = w.dot(dm_dc);
    return g;
}

double distance(const Vec& a, const Vec& b, double c) {
    require_finite(a, "distance");
    require_finite(b, "distance");
    const Vec m = mobius_add(-a, b, c);
    const double n = m.norm();
    const double x = std::min(std::sqrt(c) * n, detail::kArgGuard);
    // (2/sqrt(c)) * atanh(sqrt(c) n) written as 2 n * atanhc(sqrt(c) n); the
    // second form is exact in the c -> 0 limit.
    return 2.0 * n * atanhc(x);
}

PairGrad distance_grad(const Vec& a, const Vec& b, double c) {
    require_finite(a, "distance_grad");
    require_finite(b, "distance_grad");
    const Vec na = -a;
    const Vec m = mobius_add(na, b, c);
    const double n = m.norm();
    PairGrad g;
    if (n < 1e-12) {
        // Cusp at coincident points: zero subgradient by convention.
        g.ga = Vec::Zero(a.size());
        g.gb = Vec::Zero(b.size());
        g.gc = 0.0;
        return g;
    }
    const double s = std::sqrt(c);
    const double x = std::min(s * n, detail::kArgGuard);
    // d = (2/s) atanh(s n): dd/dn = 2 / (1 - c n^2).
    const double dd_dn = 2.0 / (1.0 - x * x);
    const Vec dd_dm = (dd_dn / n) * m;
    const PairGrad inner = mobius_add_vjp(na, b, c, dd_dm);
    g.ga = -inner.ga;
    g.gb = inner.gb;
    // Direct c-term with m held fixed: d(s) = (2/s) atanh(s n), ds/dc = 1/(2s).
    const double direct = (-2.0 / (s * s) * std::atanh(x) + dd_dn * n / s) * (0.5 / s);
    g.gc = direct + inner.gc;
    return g;
}

Vec exp_map0(const Vec& v, double c) {
    require_finite(v, "exp_map0");
    const double n = v.norm();
    if (n == 0.0) return Vec::Zero(v.size());
    const double x = std::sqrt(c) * n;
    Vec z = tanhc(x) * v;
    const double limit = (1.0 - kBallEps) / std::sqrt(c);
    const double zn = z.norm();
    if (zn > limit) z *= limit / zn;
    return z;
}

MapGrad exp_map0_vjp(const Vec& v, double c, const Vec& w) {
    MapGrad g;
    const double n = v.norm();
    if (n < 1e-300) {
        g.gx = w;  // tanhc(0) = 1
        g.gc = 0.0;
        return g;
    }
    const double s = std::sqrt(c);
    const double x = s * n;
    const double gfac = tanhc(x);
    const double dg = dtanhc(x);
    const double wv = w.dot(v);
    g.gx = gfac * w + (dg * s / n) * wv * v;
    g.gc = wv * dg * n * (0.5 / s);
    return g;
}

Vec log_map0(const Vec& z, double c) {
    require_finite(z, "log_map0");
    const double n = z.norm();
    if (n == 0.0) return Vec::Zero(z.size());
    const double x = std::sqrt(c) * n;
    if (x >= 1.0) {
        throw std::domain_error("log_map0: point on or outside the ball boundary");
    }
    return atanhc(x) * z;
}

MapGrad log_map0_vjp(const Vec& z, double c, const Vec& w) {
    MapGrad g;
    const double n = z.norm();
    if (n < 1e-300) {
        g.gx = w;
        g.gc = 0.0;
        return g;
    }
    const double s = std::sqrt(c);
    const double x = s * n;
    if (x >= 1.0) {
        throw std::domain_error("log_map0_vjp: point on or outside the ball boundary");
    }
    const double hfac = atanhc(x);
    const double dh = datanhc(x);
    const double wz = w.dot(z);
    g.gx = hfac * w + (dh * s / n) * wz * z;
    g.gc = wz * dh * n * (0.5 / s);
    return g;
}

}  // namespace hidisc
