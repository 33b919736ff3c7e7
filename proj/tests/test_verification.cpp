#include <gtest/gtest.h>

#include <cmath>

#include "hkb/exact_kernel.hpp"
#include "hkb/verification.hpp"

using namespace hkb;

namespace {

std::vector<Point> probe_grid(double t, const Point& z2, double half_width, int n) {
    std::vector<Point> out;
    const double st = std::sqrt(t);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = z2.x(0) + half_width * st * (2.0 * i / (n - 1) - 1.0);
            const double y = 0.02 * st + (z2.y + half_width * st) * j / (n - 1);
            if (y > 0.0) out.push_back(Point::planar(x, y));
        }
    return out;
}

// Synthetic c = 0 slice exp(-(u^2/k_slow + v^2/k_fast)/t) / t in coordinates rotated by 45 degrees,
// with values under 1e-12 of the peak cut to zero the way a solver's round-off floor would.
KernelSlice anisotropic_slice(double t, double k_slow, double k_fast) {
    KernelSlice s;
    s.t = t;
    s.source = Point::planar(0.0, 12.0 * std::sqrt(t));
    s.c = 0.0;
    const double st = std::sqrt(t);
    for (int i = 0; i <= 200; ++i)
        for (int j = 0; j <= 200; ++j) {
            const double dx = st * (-11.0 + 0.11 * i), dy = st * (-11.0 + 0.11 * j);
            const double u = (dx + dy) / std::sqrt(2.0), v = (dx - dy) / std::sqrt(2.0);
            double p = std::exp(-(u * u / k_slow + v * v / k_fast) / t) / t;
            if (p < 1e-12 / t) p = 0.0;
            s.samples.push_back({Point::planar(dx, s.source.y + dy), p});
        }
    return s;
}

} // namespace

TEST(EnvelopeFit, FlatWeightKernelBracketsFour) {
    const ModelOperatorSpec m = ModelOperatorSpec::planar(0.0, 0.0);
    std::vector<KernelSlice> slices;
    for (double t : {0.5, 1.0, 2.0})
        for (double y2 : {0.1, 1.0, 4.0}) {
            const Point z2 = Point::planar(0.0, y2 * std::sqrt(t));
            slices.push_back(exact_slice(m, t, z2, probe_grid(t, z2, 6.0, 41)));
        }
    const FitReport r = fit_envelope_constants(slices, EnvelopeForm::product, 0.0, 1);
    EXPECT_TRUE(r.verdict) << r.reason;
    EXPECT_GT(r.k_up, 4.0);
    EXPECT_LT(r.k_low, 4.0);
    EXPECT_LE(r.C_low, r.C_up);
    const EnvelopeCheck ck = check_envelope(slices, r.upper(), r.lower(), 0.0, 1);
    EXPECT_TRUE(ck.holds);
    EXPECT_LE(ck.max_upper_excess, 1.0 + 1e-12);
    EXPECT_GE(ck.min_lower_excess, 1.0 - 1e-12);
}

TEST(EnvelopeFit, AnisotropicRatesSurviveTheNoiseFloor) {
    // fast-direction samples drop below the floor first; the lower rate must still be the fast one
    std::vector<KernelSlice> slices{anisotropic_slice(0.5, 6.0, 2.0), anisotropic_slice(1.0, 6.0, 2.0)};
    const FitReport r = fit_envelope_constants(slices, EnvelopeForm::product, 0.0, 1);
    EXPECT_TRUE(r.verdict) << r.reason;
    EXPECT_NEAR(r.k_fit_up, 6.0, 0.3);
    EXPECT_NEAR(r.k_fit_low, 2.0, 0.2);
}

TEST(EnvelopeFit, UnderdeterminedWithoutFarField) {
    const ModelOperatorSpec m = ModelOperatorSpec::planar(0.0, 0.0);
    const Point z2 = Point::planar(0.0, 1.0);
    std::vector<KernelSlice> slices{exact_slice(m, 1.0, z2, probe_grid(1.0, z2, 1.0, 9))};
    EXPECT_THROW(fit_envelope_constants(slices, EnvelopeForm::product, 0.0, 1), FitUnderdeterminedError);
}

TEST(EnvelopeFit, RejectsLebesgueSlices) {
    const ModelOperatorSpec m = ModelOperatorSpec::planar(0.0, 1.0);
    const Point z2 = Point::planar(0.0, 1.0);
    std::vector<KernelSlice> slices{to_lebesgue(exact_slice(m, 1.0, z2, probe_grid(1.0, z2, 6.0, 21)))};
    EXPECT_THROW(fit_envelope_constants(slices, EnvelopeForm::product, 1.0, 1), ParameterError);
}

TEST(EnvelopeFit, BrokenConstantsAreDetected) {
    const ModelOperatorSpec m = ModelOperatorSpec::planar(0.0, 1.0);
    std::vector<KernelSlice> slices;
    for (double y2 : {0.2, 2.0}) {
        const Point z2 = Point::planar(0.0, y2);
        slices.push_back(exact_slice(m, 1.0, z2, probe_grid(1.0, z2, 6.0, 31)));
    }
    const FitReport r = fit_envelope_constants(slices, EnvelopeForm::product, 1.0, 1);
    ASSERT_TRUE(r.verdict);
    EnvelopeParams up = r.upper(), low = r.lower();
    up.k *= 0.5;
    EXPECT_FALSE(check_envelope(slices, up, low, 1.0, 1).holds);
    up = r.upper();
    low.k *= 2.0;
    EXPECT_FALSE(check_envelope(slices, up, low, 1.0, 1).holds);
    low = r.lower();
    up.C *= 0.5;
    EXPECT_FALSE(check_envelope(slices, up, low, 1.0, 1).holds);
}

TEST(EnvelopeFit, MoreSamplesOnlyWidenTheWindow) {
    // amplitudes are extremal ratios, so adding slices cannot shrink C_up / C_low at fixed rates
    const ModelOperatorSpec m = ModelOperatorSpec::planar(0.0, 2.0);
    std::vector<KernelSlice> slices;
    const Point za = Point::planar(0.0, 0.5), zb = Point::planar(0.0, 3.0);
    slices.push_back(exact_slice(m, 1.0, za, probe_grid(1.0, za, 6.0, 31)));
    const FitReport r1 = fit_envelope_constants(slices, EnvelopeForm::product, 2.0, 1);
    slices.push_back(exact_slice(m, 1.0, zb, probe_grid(1.0, zb, 6.0, 31)));
    const EnvelopeCheck ck = check_envelope(slices, r1.upper(), r1.lower(), 2.0, 1);
    double up = ck.max_upper_excess, low = ck.min_lower_excess;
    EXPECT_GE(up, 1.0 - 1e-12);
    EXPECT_LE(low, 1.0 + 1e-12);
}

TEST(Normalizer, KnownValues) {
    EXPECT_NEAR(gaussian_normalizer(1.0, 1.0, 1), std::sqrt(M_PI) / 2.0, 1e-14);
    EXPECT_NEAR(gaussian_normalizer(1.0, 1.0, 1), 0.886227, 1e-6);
    for (double a : {0.3, 1.0, 5.0}) EXPECT_NEAR(gaussian_normalizer(a, 0.0, 0), std::sqrt(M_PI) / (2.0 * std::sqrt(a)), 1e-14);
    EXPECT_NEAR(normalizing_alpha(1.0, 1), std::pow(std::sqrt(M_PI) / 2.0, 2.0 / 3.0), 1e-13);
    for (double c : {-0.5, 0.0, 2.0})
        for (int N : {1, 2}) EXPECT_NEAR(gaussian_normalizer(normalizing_alpha(c, N), c, N), 1.0, 1e-13);
    EXPECT_THROW(gaussian_normalizer(0.0, 0.0, 1), ParameterError);
    EXPECT_THROW(gaussian_normalizer(1.0, -1.0, 1), ParameterError);
}

TEST(Normalizer, AgreesWithQuadrature) {
    for (double c : {-0.5, 0.0, 1.0, 2.5}) {
        const double alpha = 0.7;
        const double y = integrate_weighted_halfline([&](double s) { return std::exp(-alpha * s * s); }, c, {}, 1.0);
        const double x = std::sqrt(M_PI / alpha);
        EXPECT_NEAR(x * y, gaussian_normalizer(alpha, c, 1), 1e-10) << c;
    }
}

TEST(GFunction, UnitKernelGivesZero) {
    GridSpec g{8.0, 8.0, 32, 32, 1.0};
    KernelColumn col;
    col.fields = {Field(g, 1.0), Field(g, 1.0)};
    col.times = {0.5, 1.0};
    col.source = Point::planar(0.0, 1.0);
    const GTrace tr = compute_G(col, 0.5, normalizing_alpha(1.0, 1));
    for (double G : tr.G) EXPECT_NEAR(G, 0.0, 1e-12);
    EXPECT_THROW(compute_G(col, 0.3, 1.0), ParameterError);
    EXPECT_THROW(compute_G(col, 1.0, 1.0), ParameterError);
}

TEST(GFunction, MonotoneSearch) {
    GTrace tr;
    tr.t = {1.0, 2.0, 3.0};
    tr.G = {-1.0, -1.5, -1.7};
    const GMonotoneReport r = check_G_monotone(tr, 0.5);
    EXPECT_TRUE(r.nonpositive);
    EXPECT_NEAR(r.A_min, 0.5, 1e-15);
    EXPECT_TRUE(r.monotone_with_probe);
    EXPECT_FALSE(check_G_monotone(tr, 0.4).monotone_with_probe);
    const double A = find_monotone_A(tr);
    EXPECT_GE(A, 0.5);
    EXPECT_LT(A, 1.0);
    tr.G[1] = std::nan("");
    EXPECT_TRUE(std::isinf(find_monotone_A(tr)));
}

TEST(Poincare, LinearFieldAndShifts) {
    const double c = 1.0, alpha = normalizing_alpha(c, 1);
    GridSpec g{8.0, 8.0, 128, 128, c};
    const Field u = Field::sample(g, [](double x, double) { return x; });
    // x is odd with unit gradient: the ratio is the weighted second moment 1/(2 alpha)
    EXPECT_NEAR(poincare_ratio(u, alpha), 1.0 / (2.0 * alpha), 1e-3);
    const Field v = Field::sample(g, [](double x, double y) { return x * y + 3.0; });
    const Field w = Field::sample(g, [](double x, double y) { return x * y - 11.0; });
    EXPECT_NEAR(poincare_ratio(v, alpha), poincare_ratio(w, alpha), 1e-12);
    EXPECT_TRUE(std::isnan(poincare_ratio(Field(g, 2.0), alpha)));
}

TEST(Poincare, ProbeFamilyBounded) {
    for (double c : {-0.5, 2.0}) {
        GridSpec g{8.0, 8.0, 96, 96, c};
        const double alpha = normalizing_alpha(c, 1);
        std::vector<Field> fields;
        for (const auto& nf : poincare_probe_family(g)) fields.push_back(nf.field);
        const PoincareResult r = poincare_ratio(fields, alpha);
        EXPECT_TRUE(std::isfinite(r.sup_ratio));
        EXPECT_GT(r.sup_ratio, 0.0);
        EXPECT_LT(r.sup_ratio, 10.0);
    }
}

TEST(Conservation, ExactKernelIntegratesToOne) {
    for (double c : {-0.5, 1.0})
        for (double y : {0.05, 2.0})
            EXPECT_LT(check_conservation_exact(ModelOperatorSpec::planar(0.0, c), 1.0, Point::planar(0.3, y)), 1e-8);
    EXPECT_THROW(check_conservation_exact(ModelOperatorSpec::planar(0.5, 0.0), 1.0, Point::planar(0.0, 1.0)), ParameterError);
}

TEST(Floors, ExactKernelFloorsPositiveAndUniform) {
    const ModelOperatorSpec m = ModelOperatorSpec::planar(0.0, 1.0);
    std::vector<KernelSlice> slices;
    for (double y2 : {1.0, 3.0}) {
        const Point z2 = Point::planar(0.0, y2);
        slices.push_back(exact_slice(m, 1.0, z2, probe_grid(1.0, z2, 5.0, 41)));
    }
    const FitReport r = fit_envelope_constants(slices, EnvelopeForm::product, 1.0, 1);
    const FloorReport all = far_field_floor(slices, 1.0, r.k_low);
    const FloorReport inner = far_field_floor(slices, 1.0, r.k_low, 1e-12, 3.0);
    EXPECT_GT(all.floor, 0.0);
    EXPECT_LE(all.floor, inner.floor);
    EXPECT_GE(all.floor / inner.floor, 0.5);
    EXPECT_GT(inner.count, 0u);
    EXPECT_LT(inner.count, all.count);
    const FloorReport diag = near_diagonal_floor(slices, 0.0);
    EXPECT_EQ(diag.count, slices.size());
    EXPECT_GT(near_diagonal_floor(slices, 0.1).floor, 0.5 * diag.floor);
}
