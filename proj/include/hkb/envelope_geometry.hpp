#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"
#include "operator_core.hpp"
#include "special_functions.hpp"

namespace hkb {

enum class EnvelopeForm { product, one_sided_1, one_sided_2, volume };
enum class EnvelopeSide { upper, lower };

inline const char* form_name(EnvelopeForm f) {
    switch (f) {
    case EnvelopeForm::product: return "product";
    case EnvelopeForm::one_sided_1: return "one-sided-1";
    case EnvelopeForm::one_sided_2: return "one-sided-2";
    case EnvelopeForm::volume: return "volume";
    }
    return "?";
}
inline const char* side_name(EnvelopeSide s) { return s == EnvelopeSide::upper ? "upper" : "lower"; }

struct EnvelopeParams {
    double C = 1.0;
    double k = 4.0;
    EnvelopeForm form = EnvelopeForm::product;
    EnvelopeSide side = EnvelopeSide::upper;
};

/// Volume of the unit ball in R^N.
inline double unit_ball_volume(int N) {
    if (N < 0) throw StructuralError("unit_ball_volume: N < 0");
    return std::exp(0.5 * N * std::log(M_PI) - log_gamma(0.5 * N + 1.0));
}

/// y^c-measure of Q(z0, r) = B(x0, r) x [y0, y0 + r).
inline double ball_volume(double y0, double r, double c, int N) {
    if (!(c + 1.0 > 0.0)) throw ParameterError("ball_volume: c + 1 <= 0 makes the measure divergent");
    if (!(y0 >= 0.0)) throw DomainError("ball_volume: y0 must be nonnegative");
    if (!(r > 0.0)) throw DomainError("ball_volume: r must be positive");
    const double p = c + 1.0;
    double ymass;
    if (y0 == 0.0) ymass = std::pow(r, p) / p;
    else ymass = std::pow(y0, p) * std::expm1(p * std::log1p(r / y0)) / p;
    return unit_ball_volume(N) * std::pow(r, N) * ymass;
}

inline double ball_volume(const Point& z0, double r, double c) { return ball_volume(z0.y, r, c, z0.dim()); }

namespace detail {
inline void check_envelope_args(double t, const Point& z1, const Point& z2) {
    if (!(t > 0.0)) throw DomainError("envelope: t must be positive");
    if (!(z1.y > 0.0) || !(z2.y > 0.0)) throw DomainError("envelope: y must be positive");
}
// y^{-s} (1 ^ y/sqrt t)^s
inline double boundary_weight(double y, double t, double s) {
    const double r = std::min(1.0, y / std::sqrt(t));
    return std::pow(y, -s) * std::pow(r, s);
}
} // namespace detail

/// Envelope value without the amplitude C and Gaussian factor, i.e. the weight shape of the chosen form.
inline double envelope_shape(EnvelopeForm form, double t, const Point& z1, const Point& z2, double c, int N) {
    detail::check_envelope_args(t, z1, z2);
    const double tp = std::pow(t, -0.5 * (N + 1));
    switch (form) {
    case EnvelopeForm::product:
        return tp * detail::boundary_weight(z1.y, t, 0.5 * c) * detail::boundary_weight(z2.y, t, 0.5 * c);
    case EnvelopeForm::one_sided_1: return tp * detail::boundary_weight(z1.y, t, c);
    case EnvelopeForm::one_sided_2: return tp * detail::boundary_weight(z2.y, t, c);
    case EnvelopeForm::volume: {
        const double r = std::sqrt(t);
        return 1.0 / std::sqrt(ball_volume(z1.y, r, c, N) * ball_volume(z2.y, r, c, N));
    }
    }
    return 0.0;
}

inline double envelope_eval(const EnvelopeParams& e, double t, const Point& z1, const Point& z2, double c, int N) {
    if (!(e.C > 0.0) || !(e.k > 0.0)) throw ParameterError("envelope: C and k must be positive");
    return e.C * envelope_shape(e.form, t, z1, z2, c, N) * std::exp(-distance_squared(z1, z2) / (e.k * t));
}

/// t^{-(N+2)/2} y2^{-c} (1 ^ y2/sqrt t)^c, the gradient envelope without C and the Gaussian.
inline double gradient_envelope_shape(double t, const Point& z1, const Point& z2, double c, int N) {
    detail::check_envelope_args(t, z1, z2);
    return std::pow(t, -0.5 * (N + 2)) * detail::boundary_weight(z2.y, t, c);
}

/// C t^{-(N+2)/2} y2^{-c} (1 ^ y2/sqrt t)^c exp(-|z1-z2|^2/(k t)).
inline double gradient_envelope(double t, const Point& z1, const Point& z2, double c, int N, double C, double k) {
    if (!(C > 0.0) || !(k > 0.0)) throw ParameterError("gradient_envelope: C and k must be positive");
    return C * gradient_envelope_shape(t, z1, z2, c, N) * std::exp(-distance_squared(z1, z2) / (k * t));
}

struct EquivalenceWindow {
    double lower = 1.0;
    double upper = 1.0;
    double k_shift = 0.0;  // the epsilon in exp(eps |y1 - y2|^2)
    double argmax_y1 = 0.0, argmax_y2 = 0.0;
};

/// Observed window of f(y1) / (f(y2) exp(eps |y1-y2|^2)) with f(y) = y^{-c/2} (1 ^ y)^{c/2},
/// over a log-spaced grid in (0, 50]^2 (t = 1; other t follow by scaling).
inline EquivalenceWindow envelope_equivalence_window(double c, double eps, int points = 400) {
    if (!(eps > 0.0)) throw ParameterError("envelope_equivalence_window: eps must be positive");
    std::vector<double> ys;
    const double lo = std::log(1e-4), hi = std::log(50.0);
    for (int i = 0; i < points; ++i) ys.push_back(std::exp(lo + (hi - lo) * i / (points - 1)));
    for (int i = 1; i <= 200; ++i) ys.push_back(0.25 * i);
    std::sort(ys.begin(), ys.end());
    auto f = [&](double y) { return detail::boundary_weight(y, 1.0, 0.5 * c); };
    EquivalenceWindow w;
    w.k_shift = eps;
    double sup = 0.0, inf = std::numeric_limits<double>::infinity();
    for (double y1 : ys)
        for (double y2 : ys) {
            const double d = y1 - y2;
            const double fy1 = f(y1), fy2 = f(y2), g = std::exp(eps * d * d);
            const double up = fy1 / (fy2 * g);
            if (up > sup) {
                sup = up;
                w.argmax_y1 = y1;
                w.argmax_y2 = y2;
            }
            inf = std::min(inf, fy1 * g / fy2);
        }
    w.upper = sup;
    w.lower = std::min(inf, 1.0 / sup);
    return w;
}

struct DoublingReport {
    double worst = 0.0;
    double worst_y0 = 0.0, worst_r = 0.0;
    double shape_bound = 0.0;  // 2^{N+1+c+}
    bool consistent = true;
};

/// sup of V(z0, 2r)/V(z0, r) over y0 in {0, 0.01, 0.1, 1, 10} and r on a log grid in [1e-2, 1e2].
inline DoublingReport doubling_check(double c, int N) {
    if (!(c + 1.0 > 0.0)) throw ParameterError("doubling_check: c + 1 must be positive");
    DoublingReport rep;
    rep.shape_bound = std::pow(2.0, N + 1 + std::max(c, 0.0));
    for (double y0 : {0.0, 0.01, 0.1, 1.0, 10.0})
        for (int i = 0; i <= 40; ++i) {
            const double r = std::pow(10.0, -2.0 + 4.0 * i / 40.0);
            const double ratio = ball_volume(y0, 2.0 * r, c, N) / ball_volume(y0, r, c, N);
            if (ratio > rep.worst) {
                rep.worst = ratio;
                rep.worst_y0 = y0;
                rep.worst_r = r;
            }
        }
    rep.consistent = std::isfinite(rep.worst) && rep.worst <= rep.shape_bound * (1.0 + 1e-12);
    return rep;
}

struct EnvelopeRow {
    double t;
    Point z1, z2;
    double value;
    EnvelopeForm form;
    EnvelopeSide side;
};

} // namespace hkb
