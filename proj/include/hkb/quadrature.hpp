#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "errors.hpp"

namespace hkb {

namespace detail {

struct GkPanel {
    double a, b, value, error;
    bool operator<(const GkPanel& o) const { return error < o.error; }
};

// 15-point Kronrod / 7-point Gauss pair on [a, b]; nodes and weights from Boost.
template <class F>
GkPanel gk15(F& f, double a, double b) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G = boost::math::quadrature::gauss<double, 7>;
    const auto& xk = GK::abscissa();
    const auto& wk = GK::weights();
    const auto& wg = G::weights();
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    const double f0 = f(mid);
    double k = f0 * wk[0], g = f0 * wg[0];
    for (std::size_t i = 1; i < xk.size(); ++i) {
        const double s = f(mid + half * xk[i]) + f(mid - half * xk[i]);
        k += s * wk[i];
        if (i % 2 == 0) g += s * wg[i / 2];
    }
    return {a, b, half * k, std::abs(half * (k - g))};
}

} // namespace detail

/// Globally adaptive Gauss-Kronrod (15-point) on [a, b]; either end may be infinite.
/// Splits the panel with the largest error estimate until the summed estimate is below rel_tol |I|
/// (or a round-off floor), or max_panels is reached.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-13, unsigned max_panels = 4000) {
    if (a == b) return 0.0;
    if (a > b) return -integrate(f, b, a, rel_tol, max_panels);
    const bool lo_inf = std::isinf(a), hi_inf = std::isinf(b);
    std::function<double(double)> g;
    double ta = a, tb = b;
    if (lo_inf && hi_inf) {
        g = [&](double t) {
            const double d = 1.0 - t * t;
            if (d <= 0.0) return 0.0;
            const double v = f(t / d);
            return v == 0.0 ? 0.0 : v * (1.0 + t * t) / (d * d);
        };
        ta = -1.0, tb = 1.0;
    } else if (hi_inf) {
        g = [&](double t) {
            if (t >= 1.0) return 0.0;
            const double v = f(a + t / (1.0 - t));
            return v == 0.0 ? 0.0 : v / ((1.0 - t) * (1.0 - t));
        };
        ta = 0.0, tb = 1.0;
    } else if (lo_inf) {
        g = [&](double t) {
            if (t >= 1.0) return 0.0;
            const double v = f(b - t / (1.0 - t));
            return v == 0.0 ? 0.0 : v / ((1.0 - t) * (1.0 - t));
        };
        ta = 0.0, tb = 1.0;
    } else {
        g = [&](double x) { return static_cast<double>(f(x)); };
    }
    std::priority_queue<detail::GkPanel> heap;
    detail::GkPanel first = detail::gk15(g, ta, tb);
    double total = first.value, err = first.error;
    heap.push(first);
    constexpr double eps = std::numeric_limits<double>::epsilon();
    while (heap.size() < max_panels) {
        if (err <= std::max(rel_tol * std::abs(total), 50.0 * eps * std::abs(total))) break;
        const detail::GkPanel w = heap.top();
        const double mid = 0.5 * (w.a + w.b);
        if (!(mid > w.a && mid < w.b)) break;  // panel at machine resolution
        heap.pop();
        const detail::GkPanel l = detail::gk15(g, w.a, mid), r = detail::gk15(g, mid, w.b);
        total += l.value + r.value - w.value;
        err += l.error + r.error - w.error;
        heap.push(l);
        heap.push(r);
    }
    // re-sum to shed the drift of the running updates
    total = 0.0;
    while (!heap.empty()) {
        total += heap.top().value;
        heap.pop();
    }
    return total;
}

/// Sum of adaptive integrals over consecutive breakpoints.
template <class F>
double integrate_panels(F&& f, const std::vector<double>& breaks, double rel_tol = 1e-13) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (breaks[i + 1] > breaks[i]) total += integrate(f, breaks[i], breaks[i + 1], rel_tol);
    }
    return total;
}

/// Integral of y^c g(y) over (0, infinity).
/// For c < 0 the first panel [0, split] uses u = y^{c+1}/(c+1), which removes the endpoint singularity.
/// `centers` lists points where g concentrates (Gaussian peaks); panels are split around them.
template <class G>
double integrate_weighted_halfline(G&& g, double c, const std::vector<double>& centers = {},
                                   double width = 1.0, double rel_tol = 1e-13) {
    if (!(c + 1.0 > 0.0)) throw ParameterError("integrate_weighted_halfline: c + 1 must be positive");
    const double split = std::min(1.0, width);
    double head;
    if (c < 0.0) {
        const double p = c + 1.0;
        const double umax = std::pow(split, p) / p;
        auto h = [&](double u) {
            if (u <= 0.0) return 0.0;
            return g(std::pow(p * u, 1.0 / p));
        };
        head = integrate(h, 0.0, umax, rel_tol);
    } else {
        auto h = [&](double y) { return y == 0.0 ? (c == 0.0 ? g(0.0) : 0.0) : std::pow(y, c) * g(y); };
        head = integrate(h, 0.0, split, rel_tol);
    }
    std::vector<double> br{split};
    for (double m : centers) {
        for (double k : {-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0}) {
            const double b = m + k * width;
            if (b > split) br.push_back(b);
        }
    }
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    auto h = [&](double y) { return std::pow(y, c) * g(y); };
    double body = integrate_panels(h, br, rel_tol);
    body += integrate(h, br.back(), std::numeric_limits<double>::infinity(), rel_tol);
    return head + body;
}

/// Integral of g over the real line with panels around the given centers.
template <class G>
double integrate_line(G&& g, const std::vector<double>& centers, double width, double rel_tol = 1e-13) {
    std::vector<double> br;
    for (double m : centers)
        for (double k : {-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0}) br.push_back(m + k * width);
    if (br.empty()) br.push_back(0.0);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    const double inf = std::numeric_limits<double>::infinity();
    double total = integrate(g, -inf, br.front(), rel_tol);
    total += integrate_panels(g, br, rel_tol);
    total += integrate(g, br.back(), inf, rel_tol);
    return total;
}

} // namespace hkb
