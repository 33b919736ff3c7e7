#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"
#include "operator_core.hpp"
#include "special_functions.hpp"

namespace hkb {

enum class MeasureConvention { weighted, lebesgue };

inline const char* convention_tag(MeasureConvention m) {
    return m == MeasureConvention::weighted ? "y^c" : "lebesgue";
}

struct KernelSample {
    Point z1;
    double p = 0.0;
};

/// Sampled values z1 -> p(t, z1, z2) together with the measure they are written against.
struct KernelSlice {
    double t = 1.0;
    Point source;
    double c = 0.0;  // weight exponent of the reference measure y^c dz
    MeasureConvention convention = MeasureConvention::weighted;
    std::string method;  // "exact" or "solver"
    std::vector<KernelSample> samples;
    std::vector<std::string> warnings;

    double peak() const {
        double m = 0.0;
        for (const auto& s : samples) m = std::max(m, s.p);
        return m;
    }
};

/// Converts a weighted-convention slice to the Lebesgue convention (p y2^c).
inline KernelSlice to_lebesgue(const KernelSlice& s) {
    if (s.convention == MeasureConvention::lebesgue) return s;
    KernelSlice out = s;
    const double w = std::pow(s.source.y, s.c);
    for (auto& smp : out.samples) smp.p *= w;
    out.convention = MeasureConvention::lebesgue;
    return out;
}

/// Neumann heat kernel of D_yy + (c/y) D_y with respect to y^c dy:
/// (2t)^{-1} (y1 y2)^{-(c-1)/2} exp(-(y1^2+y2^2)/(4t)) I_{(c-1)/2}(y1 y2/(2t)).
/// Written as (2t)^{-1-nu} exp(-(y1-y2)^2/(4t)) z^{-nu} e^{-z} I_nu(z), z = y1 y2/(2t).
inline double bessel_heat_kernel(double c, double t, double y1, double y2) {
    if (!(c + 1.0 > 0.0)) throw ParameterError("bessel_heat_kernel: c + 1 must be positive");
    if (!(t > 0.0)) throw DomainError("bessel_heat_kernel: t must be positive");
    if (!(y1 > 0.0) || !(y2 > 0.0)) throw DomainError("bessel_heat_kernel: y must be positive");
    const double nu = 0.5 * (c - 1.0);
    const double z = y1 * y2 / (2.0 * t);
    const double dy = y1 - y2;
    const double log_pre = -(1.0 + nu) * std::log(2.0 * t) - dy * dy / (4.0 * t);
    return std::exp(log_pre) * bessel_i_reduced(nu, z);
}

/// (4 pi t)^{-N/2} exp(-|x1-x2|^2/(4t)) p_B(t, y1, y2), the kernel of Delta_x + B_y.
inline double product_kernel(const ModelOperatorSpec& m, double t, const Point& z1, const Point& z2) {
    if (!m.commuting()) throw ParameterError("product_kernel: a != 0, use the numerical solver");
    if (z1.dim() != m.N || z2.dim() != m.N) throw StructuralError("product_kernel: point dimension != N");
    const double dx2 = (z1.x - z2.x).squaredNorm();
    const double gx = std::exp(-0.5 * m.N * std::log(4.0 * M_PI * t) - dx2 / (4.0 * t));
    return gx * bessel_heat_kernel(m.c, t, z1.y, z2.y);
}

/// Samples the exact kernel at the listed z1.
inline KernelSlice exact_slice(const ModelOperatorSpec& m, double t, const Point& z2, const std::vector<Point>& z1s) {
    KernelSlice s;
    s.t = t;
    s.source = z2;
    s.c = m.c;
    s.method = "exact";
    s.samples.reserve(z1s.size());
    for (const auto& z1 : z1s) s.samples.push_back({z1, product_kernel(m, t, z1, z2)});
    return s;
}

} // namespace hkb
