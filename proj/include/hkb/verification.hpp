#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "envelope_geometry.hpp"
#include "errors.hpp"
#include "exact_kernel.hpp"
#include "fd_solver.hpp"
#include "quadrature.hpp"

namespace hkb {

/// Runs f(0..n-1) on up to hardware_concurrency threads; results in index order.
template <class F>
auto parallel_map(std::size_t n, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
    using R = decltype(f(std::size_t{}));
    std::vector<R> out;
    out.reserve(n);
    const std::size_t width = std::max(1u, std::thread::hardware_concurrency());
    for (std::size_t b = 0; b < n; b += width) {
        std::vector<std::future<R>> batch;
        for (std::size_t i = b; i < std::min(n, b + width); ++i) batch.push_back(std::async(std::launch::async, f, i));
        for (auto& fu : batch) out.push_back(fu.get());
    }
    return out;
}

// ---------------------------------------------------------------- envelope fits

struct FitOptions {
    double margin = 0.1;        // k_up = (1 + margin) k_fit_up, k_low = k_fit_low / (1 + margin)
    double noise_floor = 1e-12; // relative to each slice's peak
    double far_field = 2.0;     // |z1 - z2| >= far_field * sqrt(t) for the rate fits
    int bins = 24;              // distance bins for the extremal rate fits
};

struct FitResidual {
    std::size_t slice = 0, sample = 0;
    double D = 0.0;      // |z1 - z2|^2 / t
    double upper = 0.0;  // envelope_upper / p, >= 1 when the bound holds
    double lower = 0.0;  // envelope_lower / p, <= 1 when the bound holds
};

struct FitReport {
    EnvelopeForm form = EnvelopeForm::product;
    double C_up = 0.0, k_up = 0.0, C_low = 0.0, k_low = 0.0;
    double k_fit_up = 0.0, k_fit_low = 0.0;  // rates before the margin
    std::vector<FitResidual> residuals;
    bool verdict = false;
    std::size_t samples_used = 0, far_samples = 0;
    double window = 0.0;  // C_up / C_low
    FitResidual worst_upper, worst_lower;
    std::string reason;

    EnvelopeParams upper() const { return {C_up, k_up, form, EnvelopeSide::upper}; }
    EnvelopeParams lower() const { return {C_low, k_low, form, EnvelopeSide::lower}; }
};

namespace detail {
struct FitPoint {
    std::size_t slice, sample;
    double D, shape, p;
    bool uncensored;  // closer to the source than every sub-floor sample of its slice
};
inline std::vector<FitPoint> fit_points(const std::vector<KernelSlice>& slices, EnvelopeForm form, double c, int N,
                                        double noise_floor) {
    std::vector<FitPoint> pts;
    for (std::size_t s = 0; s < slices.size(); ++s) {
        const KernelSlice& sl = slices[s];
        if (sl.convention != MeasureConvention::weighted) throw ParameterError("fit: slices must use the y^c dz convention");
        const double floor = noise_floor * sl.peak();
        double censor = std::numeric_limits<double>::infinity();
        for (const auto& smp : sl.samples)
            if (!(smp.p > floor) || !(smp.p > 0.0)) censor = std::min(censor, distance_squared(smp.z1, sl.source) / sl.t);
        for (std::size_t i = 0; i < sl.samples.size(); ++i) {
            const auto& smp = sl.samples[i];
            if (!(smp.p > floor) || !(smp.p > 0.0)) continue;
            const double D = distance_squared(smp.z1, sl.source) / sl.t;
            pts.push_back({s, i, D, envelope_shape(form, sl.t, smp.z1, sl.source, c, N), smp.p, D < censor});
        }
    }
    return pts;
}

// Least-squares slope of (D, L) pairs.
inline double ls_slope(const std::vector<std::pair<double, double>>& xy) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(xy.size());
    for (const auto& [x, y] : xy) sx += x, sy += y, sxx += x * x, sxy += x * y;
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}
} // namespace detail

/// Rates first: the per-bin maxima (upper side) and minima (lower side) of log(p / shape) over far-field
/// distance bins are fitted by least squares against D = |z1-z2|^2/t. The amplitudes are then the extremal
/// ratios against the widened (upper) and narrowed (lower) rates.
///
/// The minima only draw on samples closer than the first sub-floor sample of their slice. Past that distance
/// the floor removes the fastest-decaying directions first (anisotropic kernels), so a bin minimum there
/// would track the floor rather than the kernel. The verdict still covers every sample above the floor.
inline FitReport fit_envelope_constants(const std::vector<KernelSlice>& slices, EnvelopeForm form, double c, int N,
                                        const FitOptions& opt = {}) {
    FitReport r;
    r.form = form;
    const auto pts = detail::fit_points(slices, form, c, N, opt.noise_floor);
    const double dmin = opt.far_field * opt.far_field;
    double dhi = 0.0;
    std::size_t n = 0;
    for (const auto& p : pts)
        if (p.D >= dmin) dhi = std::max(dhi, p.D), ++n;
    r.samples_used = pts.size();
    r.far_samples = n;
    if (n < 2 || !(dhi > dmin)) throw FitUnderdeterminedError("fit_envelope_constants: no far-field spread in the samples");
    const int nb = std::max(2, opt.bins);
    const double width = (dhi - dmin) / nb * (1.0 + 1e-12);
    std::vector<std::pair<double, double>> hi(nb, {0.0, -std::numeric_limits<double>::infinity()});
    std::vector<std::pair<double, double>> lo(nb, {0.0, std::numeric_limits<double>::infinity()});
    for (const auto& p : pts) {
        if (p.D < dmin) continue;
        const int b = std::min(nb - 1, static_cast<int>((p.D - dmin) / width));
        const double L = std::log(p.p / p.shape);
        if (L > hi[b].second) hi[b] = {p.D, L};
        if (p.uncensored && L < lo[b].second) lo[b] = {p.D, L};
    }
    std::vector<std::pair<double, double>> hs, ls;
    for (int b = 0; b < nb; ++b) {
        if (std::isfinite(hi[b].second)) hs.push_back(hi[b]);
        if (std::isfinite(lo[b].second)) ls.push_back(lo[b]);
    }
    if (hs.size() < 2 || ls.size() < 2) throw FitUnderdeterminedError("fit_envelope_constants: fewer than two occupied distance bins");
    const double su = detail::ls_slope(hs), sl = detail::ls_slope(ls);
    if (!(su < 0.0) || !(sl < 0.0)) {
        r.reason = "far-field samples do not decay";
        return r;
    }
    r.k_fit_up = -1.0 / su;
    r.k_fit_low = -1.0 / sl;
    r.k_up = (1.0 + opt.margin) * r.k_fit_up;
    r.k_low = r.k_fit_low / (1.0 + opt.margin);
    double cup = 0.0, clow = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) {
        cup = std::max(cup, p.p / (p.shape * std::exp(-p.D / r.k_up)));
        clow = std::min(clow, p.p / (p.shape * std::exp(-p.D / r.k_low)));
    }
    r.C_up = cup;
    r.C_low = clow;
    r.window = cup / clow;
    r.residuals.reserve(pts.size());
    r.worst_upper.upper = std::numeric_limits<double>::infinity();
    r.worst_lower.lower = 0.0;
    for (const auto& p : pts) {
        FitResidual fr{p.slice, p.sample, p.D, cup * p.shape * std::exp(-p.D / r.k_up) / p.p,
                       clow * p.shape * std::exp(-p.D / r.k_low) / p.p};
        if (fr.upper < r.worst_upper.upper) r.worst_upper = fr;
        if (fr.lower > r.worst_lower.lower) r.worst_lower = fr;
        r.residuals.push_back(fr);
    }
    const bool finite = std::isfinite(cup) && std::isfinite(clow) && cup > 0.0 && clow > 0.0;
    r.verdict = finite && r.k_low < r.k_up && clow <= cup && r.worst_upper.upper >= 1.0 - 1e-12 &&
                r.worst_lower.lower <= 1.0 + 1e-12;
    if (!r.verdict) r.reason = finite ? "rates or amplitudes out of order" : "non-finite constants";
    return r;
}

struct EnvelopeCheck {
    bool holds = true;
    double max_upper_excess = 0.0;  // max p / envelope_upper (<= 1 when the upper bound holds)
    double min_lower_excess = std::numeric_limits<double>::infinity();  // min p / envelope_lower (>= 1)
    std::size_t violations = 0, checked = 0;
};

/// Checks fixed constants against the samples (above the noise floor).
inline EnvelopeCheck check_envelope(const std::vector<KernelSlice>& slices, const EnvelopeParams& up,
                                    const EnvelopeParams& low, double c, int N, double noise_floor = 1e-12) {
    EnvelopeCheck ck;
    const auto pts = detail::fit_points(slices, up.form, c, N, noise_floor);
    for (const auto& p : pts) {
        const double eu = up.C * p.shape * std::exp(-p.D / up.k);
        const double sl = low.form == up.form ? p.shape
                                              : envelope_shape(low.form, slices[p.slice].t, slices[p.slice].samples[p.sample].z1,
                                                               slices[p.slice].source, c, N);
        const double el = low.C * sl * std::exp(-p.D / low.k);
        const double ru = p.p / eu, rl = p.p / el;
        ck.max_upper_excess = std::max(ck.max_upper_excess, ru);
        ck.min_lower_excess = std::min(ck.min_lower_excess, rl);
        if (ru > 1.0 + 1e-12 || rl < 1.0 - 1e-12) ++ck.violations;
        ++ck.checked;
    }
    ck.holds = ck.violations == 0;
    return ck;
}

// ---------------------------------------------------------------- gradient bound

struct GradientSample {
    double t;
    Point z1, z2;
    double norm;  // |grad_{z1} p(t, z1, z2)|
};

struct GradientFit {
    double C = 0.0, k = 0.0;
};

/// |grad_{z1} p| of the exact kernel by central differences with step h.
inline double exact_gradient_norm(const ModelOperatorSpec& m, double t, const Point& z1, const Point& z2, double h) {
    Eigen::VectorXd g(m.N + 1);
    for (int i = 0; i < m.N; ++i) {
        Point a = z1, b = z1;
        a.x(i) += h;
        b.x(i) -= h;
        g(i) = (product_kernel(m, t, a, z2) - product_kernel(m, t, b, z2)) / (2.0 * h);
    }
    const double hy = std::min(h, 0.5 * z1.y);
    Point a = z1, b = z1;
    a.y += hy;
    b.y -= hy;
    g(m.N) = (product_kernel(m, t, a, z2) - product_kernel(m, t, b, z2)) / (2.0 * hy);
    return g.norm();
}

/// Same fit order as for the kernel: rate from the per-bin maxima over far-field distances, amplitude as the
/// extremal ratio.
inline GradientFit fit_gradient_constants(const std::vector<GradientSample>& samples, double c, int N, double far_field = 2.0,
                                          double noise_floor = 1e-10, int bins = 24) {
    double peak = 0.0, dhi = 0.0;
    for (const auto& s : samples) peak = std::max(peak, s.norm);
    const double dmin = far_field * far_field;
    for (const auto& s : samples)
        if (s.norm > noise_floor * peak) dhi = std::max(dhi, distance_squared(s.z1, s.z2) / s.t);
    if (!(dhi > dmin)) throw FitUnderdeterminedError("fit_gradient_constants: no far-field samples");
    const double width = (dhi - dmin) / bins * (1.0 + 1e-12);
    std::vector<std::pair<double, double>> hi(bins, {0.0, -std::numeric_limits<double>::infinity()});
    for (const auto& s : samples) {
        const double D = distance_squared(s.z1, s.z2) / s.t;
        if (D < dmin || !(s.norm > noise_floor * peak)) continue;
        const int b = std::min(bins - 1, static_cast<int>((D - dmin) / width));
        const double L = std::log(s.norm / gradient_envelope_shape(s.t, s.z1, s.z2, c, N));
        if (L > hi[b].second) hi[b] = {D, L};
    }
    std::vector<std::pair<double, double>> hs;
    for (const auto& h : hi)
        if (std::isfinite(h.second)) hs.push_back(h);
    if (hs.size() < 2) throw FitUnderdeterminedError("fit_gradient_constants: fewer than two occupied distance bins");
    const double slope = detail::ls_slope(hs);
    if (!(slope < 0.0)) throw FitUnderdeterminedError("fit_gradient_constants: gradient samples do not decay");
    GradientFit f;
    f.k = -1.0 / slope;
    for (const auto& s : samples)
        if (s.norm > noise_floor * peak) f.C = std::max(f.C, s.norm / gradient_envelope(s.t, s.z1, s.z2, c, N, 1.0, f.k));
    return f;
}

/// max |grad p| / gradient_envelope over samples above the noise floor (<= 1 means the bound holds).
inline double gradient_excess(const std::vector<GradientSample>& samples, double c, int N, double C, double k,
                              double noise_floor = 1e-10) {
    double peak = 0.0, worst = 0.0;
    for (const auto& s : samples) peak = std::max(peak, s.norm);
    for (const auto& s : samples)
        if (s.norm > noise_floor * peak) worst = std::max(worst, s.norm / gradient_envelope(s.t, s.z1, s.z2, c, N, C, k));
    return worst;
}

/// |grad p| at interior nodes of a solver column (discrete_gradient).
inline std::vector<GradientSample> field_gradient_samples(const Field& column, double t, const Point& z2, int stride = 1) {
    const auto [gx, gy] = discrete_gradient(column);
    std::vector<GradientSample> out;
    const GridSpec& g = column.grid;
    for (int j = 1; j + 1 < g.ny; j += stride)
        for (int i = 1; i + 1 < g.nx; i += stride)
            out.push_back({t, Point::planar(g.x(i), g.y(j)), z2, std::hypot(gx.at(i, j), gy.at(i, j))});
    return out;
}

// ---------------------------------------------------------------- conservation

/// |sum w p - 1| for a discrete kernel column.
inline double check_conservation(const Field& column) { return std::abs(column.mass() - 1.0); }

/// |int p(t, z1, z2) y2^c dz2 - 1| by quadrature (y by adaptive Gauss-Kronrod, x-factor per coordinate).
inline double check_conservation_exact(const ModelOperatorSpec& m, double t, const Point& z1) {
    if (!m.commuting()) throw ParameterError("check_conservation_exact: a != 0");
    const double st = std::sqrt(t);
    auto gy = [&](double y2) { return y2 > 0.0 ? bessel_heat_kernel(m.c, t, z1.y, y2) : bessel_heat_kernel(m.c, t, z1.y, 1e-300); };
    const double ymass = integrate_weighted_halfline(gy, m.c, {z1.y}, st);
    double xmass = 1.0;
    for (int i = 0; i < m.N; ++i) {
        const double xi = z1.x(i);
        auto gx = [&](double x2) { return std::exp(-(x2 - xi) * (x2 - xi) / (4.0 * t)) / std::sqrt(4.0 * M_PI * t); };
        xmass *= integrate_line(gx, {xi}, st);
    }
    return std::abs(xmass * ymass - 1.0);
}

// ---------------------------------------------------------------- identities

struct IdentityReport {
    double scaling = 0.0;
    double translation = 0.0;
    double adjoint = 0.0;
    double chapman_kolmogorov = 0.0;
};

struct ProbePair {
    Point z1, z2;
};

/// Residuals of the four identities for the exact a = 0 kernel over the probe pairs (relative to p).
/// Chapman-Kolmogorov is evaluated as p(t) * p(s) -> p(t + s) by quadrature.
inline IdentityReport check_identities_exact(const ModelOperatorSpec& m, double t, double s, double x0, double scale,
                                             const std::vector<ProbePair>& probes) {
    if (!m.commuting()) throw ParameterError("check_identities_exact: a != 0");
    IdentityReport r;
    const double expo = m.N + 1 + m.c;
    for (const auto& pr : probes) {
        const double p = product_kernel(m, t, pr.z1, pr.z2);
        Point a{pr.z1.x * scale, pr.z1.y * scale}, b{pr.z2.x * scale, pr.z2.y * scale};
        const double ps = product_kernel(m, scale * scale * t, a, b) * std::pow(scale, expo);
        r.scaling = std::max(r.scaling, std::abs(ps - p) / p);
        Point ta{(pr.z1.x.array() + x0).matrix(), pr.z1.y}, tb{(pr.z2.x.array() + x0).matrix(), pr.z2.y};
        r.translation = std::max(r.translation, std::abs(product_kernel(m, t, ta, tb) - p) / p);
        r.adjoint = std::max(r.adjoint, std::abs(product_kernel(m, t, pr.z2, pr.z1) - p) / p);

        // int p(t, z1, w) p(s, w, z2) w_y^c dw: x-part per coordinate, y-part on the weighted half-line
        double xpart = 1.0;
        for (int i = 0; i < m.N; ++i) {
            const double x1 = pr.z1.x(i), x2 = pr.z2.x(i);
            auto gx = [&](double w) {
                return std::exp(-(x1 - w) * (x1 - w) / (4.0 * t) - (w - x2) * (w - x2) / (4.0 * s)) /
                       (4.0 * M_PI * std::sqrt(t * s));
            };
            xpart *= integrate_line(gx, {x1, x2}, std::sqrt(std::min(t, s)));
        }
        auto gy = [&](double w) {
            const double ww = std::max(w, 1e-300);
            return bessel_heat_kernel(m.c, t, pr.z1.y, ww) * bessel_heat_kernel(m.c, s, ww, pr.z2.y);
        };
        const double ypart = integrate_weighted_halfline(gy, m.c, {pr.z1.y, pr.z2.y}, std::sqrt(std::min(t, s)));
        const double target = product_kernel(m, t + s, pr.z1, pr.z2);
        r.chapman_kolmogorov = std::max(r.chapman_kolmogorov, std::abs(xpart * ypart - target) / target);
    }
    return r;
}

/// Residuals for the solver. Probe points are snapped to cell centers.
/// scaling: the column on grid.scaled(scale) at scale^2 t against the unscaled one, node for node (rel. to peak);
/// translation: source shifted by x0_cells cells, compared on the overlap (rel. to peak);
/// adjoint: primal column from z2 at z1 against adjoint column from z1 at z2 (rel. to the larger value);
/// Chapman-Kolmogorov: sum_w w p*(t, w, z1) p(s, w, z2) against p(t + s, z1, z2) (rel. to that value).
inline IdentityReport check_identities_solver(const ModelOperatorSpec& m, const GridSpec& grid, double t, double s,
                                              int x0_cells, double scale, const std::vector<ProbePair>& probes,
                                              const EvolveOptions& opt = {}) {
    IdentityReport r;
    const DiscreteOperator op = assemble(m, grid);
    const DiscreteOperator adj = op.adjoint_operator();
    const GridSpec& g = op.grid;
    auto snap = [&](const Point& z) {
        auto [i, j] = g.locate(z.x(0), z.y);
        return std::pair<int, int>{i, j};
    };
    auto center = [&](std::pair<int, int> ij) { return Point::planar(g.x(ij.first), g.y(ij.second)); };
    const double expo = m.N + 1 + m.c;

    for (const auto& pr : probes) {
        const auto c1 = snap(pr.z1), c2 = snap(pr.z2);
        const Point z1 = center(c1), z2 = center(c2);

        const Field base = kernel_column(op, {t}, z2, true, opt).fields.front();
        const double peak = base.values.maxCoeff();
        {
            const DiscreteOperator ops = assemble(m, g.scaled(scale));
            const Point sz2 = Point::planar(ops.grid.x(c2.first), ops.grid.y(c2.second));
            EvolveOptions o = opt;
            o.steps = default_steps(g, t);
            const Field sc = kernel_column(ops, {scale * scale * t}, sz2, false, o).fields.front();
            r.scaling = std::max(r.scaling, (std::pow(scale, expo) * sc.values - base.values).cwiseAbs().maxCoeff() / peak);
        }
        {
            const int sh = x0_cells;
            const Point tz2 = Point::planar(g.x(c2.first + sh), z2.y);
            const Field moved = kernel_column(op, {t}, tz2, true, opt).fields.front();
            double worst = 0.0;
            for (int j = 0; j < g.ny; ++j)
                for (int i = std::max(0, -sh); i < std::min(g.nx, g.nx - sh); ++i)
                    worst = std::max(worst, std::abs(moved.at(i + sh, j) - base.at(i, j)));
            r.translation = std::max(r.translation, worst / peak);
        }
        {
            const Field star = kernel_column(adj, {t}, z1, true, opt).fields.front();
            const double pv = base.at(c1.first, c1.second), qv = star.at(c2.first, c2.second);
            r.adjoint = std::max(r.adjoint, std::abs(pv - qv) / std::max(std::abs(pv), std::abs(qv)));
        }
        {
            EvolveOptions o = opt;
            const double dt = std::min(std::pow(std::max(g.hx(), g.hy()), 2), std::min(t, s) / 64.0);
            o.steps = std::max(1, static_cast<int>(std::lround(t / dt)));
            const Field pt = kernel_column(adj, {t}, z1, true, o).fields.front();
            o.steps = std::max(1, static_cast<int>(std::lround(s / dt)));
            const Field ps = kernel_column(op, {s}, z2, true, o).fields.front();
            o.steps = std::max(1, static_cast<int>(std::lround((t + s) / dt)));
            const Field pts = kernel_column(op, {t + s}, z2, true, o).fields.front();
            const double ck = (op.w.array() * pt.values.array() * ps.values.array()).sum();
            const double target = pts.at(c1.first, c1.second);
            r.chapman_kolmogorov = std::max(r.chapman_kolmogorov, std::abs(ck - target) / target);
        }
    }
    return r;
}

// ---------------------------------------------------------------- Gaussian normalizer

/// int_{R^N x (0, inf)} y^c exp(-alpha |z|^2) dz = pi^{N/2} alpha^{-(N+1+c)/2} Gamma((c+1)/2) / 2.
inline double gaussian_normalizer(double alpha, double c, int N) {
    if (!(alpha > 0.0)) throw ParameterError("gaussian_normalizer: alpha must be positive");
    if (!(c + 1.0 > 0.0)) throw ParameterError("gaussian_normalizer: c + 1 must be positive");
    if (N < 0) throw ParameterError("gaussian_normalizer: N must be nonnegative");
    return std::exp(0.5 * N * std::log(M_PI) - 0.5 * (N + 1 + c) * std::log(alpha) + log_gamma(0.5 * (c + 1.0))) / 2.0;
}

/// The alpha with gaussian_normalizer(alpha, c, N) = 1 (the normalizer is strictly decreasing in alpha).
inline double normalizing_alpha(double c, int N) {
    auto f = [&](double la) { return std::log(gaussian_normalizer(std::exp(la), c, N)); };
    double lo = -1.0, hi = 1.0;
    while (f(lo) < 0.0) lo *= 2.0;
    while (f(hi) > 0.0) hi *= 2.0;
    boost::uintmax_t iters = 200;
    const auto res = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
    return std::exp(0.5 * (res.first + res.second));
}

// ---------------------------------------------------------------- Nash G-function

struct GTrace {
    double theta = 0.5, alpha = 1.0;
    Point z2;
    std::vector<double> t, G;
};

namespace detail {
inline void check_theta(double theta) {
    if (!(theta >= 0.5 && theta < 1.0)) throw ParameterError("G-function: theta must lie in [1/2, 1)");
}
} // namespace detail

/// G(t) = int log(theta p(t, z, z2) + 1 - theta) e^{-alpha |z|^2} y^c dz from solver snapshots.
/// Outside the grid p is treated as 0, so the remaining nu-mass (closed form minus grid sum) contributes log(1 - theta).
inline GTrace compute_G(const KernelColumn& col, double theta, double alpha) {
    detail::check_theta(theta);
    GTrace tr;
    tr.theta = theta;
    tr.alpha = alpha;
    tr.z2 = col.source;
    for (std::size_t s = 0; s < col.fields.size(); ++s) {
        const Field& f = col.fields[s];
        const GridSpec& g = f.grid;
        const Eigen::VectorXd w = g.masses();
        double G = 0.0, numass = 0.0;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const int k = g.index(i, j);
                const double nu = w(k) * std::exp(-alpha * (g.x(i) * g.x(i) + g.y(j) * g.y(j)));
                const double p = std::max(f.values(k), 0.0);
                G += nu * std::log(theta * p + 1.0 - theta);
                numass += nu;
            }
        const double tail = std::max(0.0, gaussian_normalizer(alpha, g.c, 1) - numass);
        G += tail * std::log(1.0 - theta);
        tr.t.push_back(col.times[s]);
        tr.G.push_back(G);
    }
    return tr;
}

/// Same quantity for the exact a = 0 kernel by nested quadrature (N = 1).
inline GTrace compute_G_exact(const ModelOperatorSpec& m, const Point& z2, double theta, double alpha,
                              const std::vector<double>& times) {
    detail::check_theta(theta);
    if (m.N != 1) throw StructuralError("compute_G_exact: N = 1 only");
    GTrace tr;
    tr.theta = theta;
    tr.alpha = alpha;
    tr.z2 = z2;
    const double width = 1.0 / std::sqrt(alpha);
    for (double t : times) {
        auto inner = [&](double y) {
            const double yy = std::max(y, 1e-300);
            const double pb = bessel_heat_kernel(m.c, t, yy, z2.y);
            auto gx = [&](double x) {
                const double dx = x - z2.x(0);
                const double p = std::exp(-dx * dx / (4.0 * t)) / std::sqrt(4.0 * M_PI * t) * pb;
                return std::log(theta * p + 1.0 - theta) * std::exp(-alpha * x * x);
            };
            return integrate_line(gx, {0.0, z2.x(0)}, std::min(width, std::sqrt(t)), 1e-10) * std::exp(-alpha * yy * yy);
        };
        tr.t.push_back(t);
        tr.G.push_back(integrate_weighted_halfline(inner, m.c, {z2.y}, std::min(width, std::sqrt(t)), 1e-10));
    }
    return tr;
}

struct GMonotoneReport {
    bool finite = true;
    bool nonpositive = true;
    double max_G = -std::numeric_limits<double>::infinity();
    double A_min = 0.0;            // smallest A making G + A t nondecreasing on the samples
    bool monotone_with_probe = false;
    double G_last = 0.0;           // G at the largest sampled time
};

/// Certifies G <= 0 and checks G + A_probe t nondecreasing on the sample grid.
inline GMonotoneReport check_G_monotone(const GTrace& tr, double A_probe) {
    GMonotoneReport r;
    for (std::size_t i = 0; i < tr.G.size(); ++i) {
        r.finite = r.finite && std::isfinite(tr.G[i]);
        r.max_G = std::max(r.max_G, tr.G[i]);
        if (i > 0) {
            const double drop = (tr.G[i - 1] - tr.G[i]) / (tr.t[i] - tr.t[i - 1]);
            r.A_min = std::max(r.A_min, drop);
        }
    }
    r.nonpositive = r.max_G <= 0.0;
    r.monotone_with_probe = r.finite && A_probe >= r.A_min;
    if (!tr.G.empty()) r.G_last = tr.G.back();
    return r;
}

/// Doubling line search for a finite A with G + A t nondecreasing; returns infinity if none up to A_max.
inline double find_monotone_A(const GTrace& tr, double A_max = 1e8) {
    double A = 0.0;
    if (check_G_monotone(tr, A).monotone_with_probe) return A;
    for (A = 1e-3; A <= A_max; A *= 2.0)
        if (check_G_monotone(tr, A).monotone_with_probe) return A;
    return std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------- Poincare

struct PoincareResult {
    double sup_ratio = 0.0;
    std::vector<double> ratios;  // NaN for excluded (constant) fields
};

/// ||u - u_bar||^2_nu / ||grad u||^2_nu with nu = y^c e^{-alpha|z|^2} dz on the grid.
inline double poincare_ratio(const Field& u, double alpha) {
    const GridSpec& g = u.grid;
    const Eigen::VectorXd w = g.masses();
    Eigen::VectorXd nu(g.size());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) nu(g.index(i, j)) = w(g.index(i, j)) * std::exp(-alpha * (g.x(i) * g.x(i) + g.y(j) * g.y(j)));
    const double total = nu.sum();
    const double mean = nu.dot(u.values) / total;
    const double num = nu.dot((u.values.array() - mean).square().matrix());
    const auto [gx, gy] = discrete_gradient(u);
    const double den = nu.dot((gx.values.array().square() + gy.values.array().square()).matrix());
    if (!(den > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return num / den;
}

inline PoincareResult poincare_ratio(const std::vector<Field>& fields, double alpha) {
    PoincareResult r;
    for (const auto& f : fields) {
        const double q = poincare_ratio(f, alpha);
        r.ratios.push_back(q);
        if (std::isfinite(q)) r.sup_ratio = std::max(r.sup_ratio, q);
        else if (!std::isnan(q)) r.sup_ratio = q;
    }
    return r;
}

struct NamedField {
    std::string name;
    Field field;
};

/// Polynomials up to degree 3, a bump at y = 0.01 and a far-field bump.
inline std::vector<NamedField> poincare_probe_family(const GridSpec& g) {
    std::vector<NamedField> out;
    const int powers[][2] = {{1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}, {3, 0}, {2, 1}, {1, 2}, {0, 3}};
    for (const auto& pw : powers) {
        const int a = pw[0], b = pw[1];
        out.push_back({"x^" + std::to_string(a) + " y^" + std::to_string(b),
                       Field::sample(g, [&](double x, double y) { return std::pow(x, a) * std::pow(y, b); })});
    }
    const double s = std::max(0.05, 2.0 * std::max(g.hx(), g.hy()));
    out.push_back({"bump y=0.01", Field::sample(g, [&](double x, double y) {
                       return std::exp(-(x * x + (y - 0.01) * (y - 0.01)) / (s * s));
                   })});
    out.push_back({"bump far", Field::sample(g, [&](double x, double y) {
                       return std::exp(-((x - 3.0) * (x - 3.0) + (y - 3.0) * (y - 3.0)) / 0.25);
                   })});
    return out;
}

// ---------------------------------------------------------------- lower-bound floors

struct FloorReport {
    double floor = std::numeric_limits<double>::infinity();
    std::size_t count = 0;
    std::size_t slice = 0, sample = 0;
};

/// min of p V(z2, sqrt t) exp(|z1-z2|^2/(k t)) over samples with y1, y2 >= r sqrt t that sit above the
/// slice's noise floor (same convention as the envelope fit), optionally only within max_radius sqrt t.
inline FloorReport far_field_floor(const std::vector<KernelSlice>& slices, double r, double k, double noise_floor = 1e-12,
                                   double max_radius = std::numeric_limits<double>::infinity()) {
    FloorReport f;
    for (std::size_t s = 0; s < slices.size(); ++s) {
        const auto& sl = slices[s];
        const double st = std::sqrt(sl.t);
        if (sl.source.y < r * st) continue;
        const double V = ball_volume(sl.source, st, sl.c);
        const double pfloor = noise_floor * sl.peak();
        for (std::size_t i = 0; i < sl.samples.size(); ++i) {
            const auto& smp = sl.samples[i];
            if (smp.z1.y < r * st || !(smp.p > pfloor)) continue;
            const double D = distance_squared(smp.z1, sl.source) / sl.t;
            if (D > max_radius * max_radius) continue;
            const double v = smp.p * V * std::exp(D / k);
            ++f.count;
            if (v < f.floor) f.floor = v, f.slice = s, f.sample = i;
        }
    }
    return f;
}

/// min of p V(z2, sqrt t) over samples with |z1 - z2| <= radius sqrt t (radius 0: the sample nearest z2).
inline FloorReport near_diagonal_floor(const std::vector<KernelSlice>& slices, double radius) {
    FloorReport f;
    for (std::size_t s = 0; s < slices.size(); ++s) {
        const auto& sl = slices[s];
        const double st = std::sqrt(sl.t);
        const double V = ball_volume(sl.source, st, sl.c);
        std::size_t nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < sl.samples.size(); ++i) {
            const double d = std::sqrt(distance_squared(sl.samples[i].z1, sl.source));
            if (d < best) best = d, nearest = i;
            if (radius > 0.0 && d <= radius * st) {
                const double v = sl.samples[i].p * V;
                ++f.count;
                if (v < f.floor) f.floor = v, f.slice = s, f.sample = i;
            }
        }
        if (radius == 0.0 && !sl.samples.empty()) {
            const double v = sl.samples[nearest].p * V;
            ++f.count;
            if (v < f.floor) f.floor = v, f.slice = s, f.sample = nearest;
        }
    }
    return f;
}

} // namespace hkb
