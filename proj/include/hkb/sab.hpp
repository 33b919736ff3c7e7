#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "fd_solver.hpp"

namespace hkb {

/// S(t) f(z1) = t^{-(N+M)/2} (|y1|/sqrt t ^ 1)^{-alpha} int (|y2|/sqrt t ^ 1)^{-beta} e^{-|z1-z2|^2/(kappa t)} f(z2) dz2
/// acting from L^p_m to L^p_{m - p theta}, weight |y|^m on R^{N+M}.
struct SabSpec {
    double alpha = 0.0, beta = 0.0, theta = 0.0, m = 0.0, p = 2.0;
    int M = 1;
    int N = 1;
    double kappa = 4.0;
};

inline void validate_sab(const SabSpec& s) {
    if (!(s.p >= 1.0) || !std::isfinite(s.p)) throw ParameterError("S: p must lie in [1, infinity)");
    if (s.M < 1 || s.N < 0) throw ParameterError("S: M >= 1 and N >= 0 required");
    if (!(s.kappa > 0.0)) throw ParameterError("S: kappa must be positive");
    if (!(s.theta >= 0.0)) throw ParameterError("S: theta must be nonnegative");
}

/// alpha + theta < (M+m)/p < M - beta for p > 1; alpha + theta < M + m <= M - beta for p = 1.
inline bool sab_criterion(const SabSpec& s) {
    validate_sab(s);
    const double lhs = s.alpha + s.theta;
    if (s.p == 1.0) return lhs < s.M + s.m && s.M + s.m <= s.M - s.beta;
    const double mid = (s.M + s.m) / s.p;
    return lhs < mid && mid < s.M - s.beta;
}

namespace detail {
inline double sab_weight(double y, double t, double e) {
    return std::pow(std::min(std::abs(y) / std::sqrt(t), 1.0), -e);
}
} // namespace detail

/// S(t) applied to a field on the half-plane grid (N = M = 1), the field standing for its even extension in y.
/// Midpoint quadrature in both directions; the x- and y-integrals are applied as separate passes.
inline Field sab_apply(const SabSpec& s, double t, const Field& f) {
    validate_sab(s);
    if (s.N != 1 || s.M != 1) throw StructuralError("sab_apply: fields carry N = M = 1");
    if (!(t > 0.0)) throw DomainError("sab_apply: t must be positive");
    const GridSpec& g = f.grid;
    const double kt = s.kappa * t;
    Eigen::MatrixXd Kx(g.nx, g.nx), Ky(g.ny, g.ny);
    for (int a = 0; a < g.nx; ++a)
        for (int b = 0; b < g.nx; ++b) {
            const double d = g.x(a) - g.x(b);
            Kx(a, b) = std::exp(-d * d / kt) * g.hx();
        }
    for (int a = 0; a < g.ny; ++a)
        for (int b = 0; b < g.ny; ++b) {
            const double dm = g.y(a) - g.y(b), dp = g.y(a) + g.y(b);
            Ky(a, b) = detail::sab_weight(g.y(a), t, s.alpha) * (std::exp(-dm * dm / kt) + std::exp(-dp * dp / kt)) *
                       detail::sab_weight(g.y(b), t, s.beta) * g.hy() / t;
        }
    // values as an nx x ny matrix (column j = row of cells at y_j)
    const Eigen::Map<const Eigen::MatrixXd> F(f.values.data(), g.nx, g.ny);
    Eigen::MatrixXd out = Kx * F * Ky.transpose();
    return Field(g, Eigen::Map<Eigen::VectorXd>(out.data(), g.size()));
}

/// ||f||_{L^p(|y|^m)} on the half-plane grid (the even extension's norm is 2^{1/p} times this).
inline double sab_weighted_norm(const Field& f, double p, double m) {
    const GridSpec& g = f.grid;
    double acc = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) acc += std::pow(std::abs(f.at(i, j)), p) * std::pow(g.y(j), m) * g.hx() * g.hy();
    return std::pow(acc, 1.0 / p);
}

struct SabLadder {
    std::vector<double> y_min;   // smallest resolved y per level
    std::vector<double> norms;   // empirical operator norm per level
    std::vector<int> argmax_bump;  // j of the maximizing bump [2^{-j}, 2^{1-j}) sqrt t
    bool stabilizes = false;     // last two levels agree to stabilization_tolerance
    bool diverges = false;       // last / first >= divergence_factor
};

struct SabLadderOptions {
    int levels = 3;
    int octaves_per_level = 8;   // level l resolves y down to 2^{-8(l+1)} sqrt t
    int cells_per_octave = 8;
    int far_octaves = 3;         // bumps spreading out to y ~ 2^3 sqrt t
    double stabilization_tolerance = 0.05;
    double divergence_factor = 10.0;
};

/// Maximizes ||S f||_{L^p_{m - p theta}} / ||f||_{L^p_m} over octave bumps on a refinement ladder (M = 1).
/// S factors as (x-convolution) x (y-operator); the x-factor has norm exactly (pi kappa)^{N/2} on L^p(R^N)
/// and is applied as that constant, so only the y-operator is discretized.
inline SabLadder sab_norm_estimate(const SabSpec& s, double t, const SabLadderOptions& opt = {}) {
    validate_sab(s);
    if (s.M != 1) throw StructuralError("sab_norm_estimate: M = 1 only");
    if (!(t > 0.0)) throw DomainError("sab_norm_estimate: t must be positive");
    const double st = std::sqrt(t);
    const double kt = s.kappa * t;
    const double xfactor = std::pow(M_PI * s.kappa, 0.5 * s.N);
    SabLadder lad;
    for (int level = 0; level < opt.levels; ++level) {
        const int J = opt.octaves_per_level * (level + 1);
        // cell edges: log-spaced from 2^{-J} sqrt t up to 2^{far} sqrt t, then uniform out to the Gaussian tail
        std::vector<double> edges;
        const int nlog = (J + opt.far_octaves) * opt.cells_per_octave;
        for (int k = 0; k <= nlog; ++k) edges.push_back(st * std::pow(2.0, -J + double(k) / opt.cells_per_octave));
        const double top = st * std::pow(2.0, opt.far_octaves + 1) + 8.0 * std::sqrt(kt);
        const double du = edges.back() - edges[edges.size() - 2];
        while (edges.back() < top) edges.push_back(edges.back() + du);
        const int n = static_cast<int>(edges.size()) - 1;
        std::vector<double> yc(n), dy(n);
        for (int k = 0; k < n; ++k) yc[k] = 0.5 * (edges[k] + edges[k + 1]), dy[k] = edges[k + 1] - edges[k];

        Eigen::MatrixXd K(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const double dm = yc[a] - yc[b], dp = yc[a] + yc[b];
                K(a, b) = detail::sab_weight(yc[a], t, s.alpha) * (std::exp(-dm * dm / kt) + std::exp(-dp * dp / kt)) *
                          detail::sab_weight(yc[b], t, s.beta) * dy[b] / st;
            }
        double best = 0.0;
        int arg = 0;
        for (int j = -opt.far_octaves; j <= J; ++j) {
            const double lo = st * std::pow(2.0, -j), hi = 2.0 * lo;
            Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
            double in = 0.0;
            for (int k = 0; k < n; ++k)
                if (yc[k] >= lo && yc[k] < hi) {
                    h(k) = 1.0;
                    in += std::pow(yc[k], s.m) * dy[k];
                }
            if (!(in > 0.0)) continue;
            const Eigen::VectorXd Sh = K * h;
            double out = 0.0;
            for (int k = 0; k < n; ++k) out += std::pow(std::abs(Sh(k)), s.p) * std::pow(yc[k], s.m - s.p * s.theta) * dy[k];
            const double ratio = std::pow(out / in, 1.0 / s.p);
            if (ratio > best) best = ratio, arg = j;
        }
        lad.y_min.push_back(edges.front());
        lad.norms.push_back(xfactor * best);
        lad.argmax_bump.push_back(arg);
    }
    const std::size_t L = lad.norms.size();
    if (L >= 2) {
        lad.stabilizes = std::abs(lad.norms[L - 1] / lad.norms[L - 2] - 1.0) <= opt.stabilization_tolerance;
        lad.diverges = lad.norms[L - 1] / lad.norms[0] >= opt.divergence_factor;
    }
    return lad;
}

} // namespace hkb
