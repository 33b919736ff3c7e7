#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hkb/envelope_geometry.hpp"

using namespace hkb;

TEST(BallVolume, UnitBalls) {
    EXPECT_DOUBLE_EQ(unit_ball_volume(0), 1.0);
    EXPECT_NEAR(unit_ball_volume(1), 2.0, 1e-14);
    EXPECT_NEAR(unit_ball_volume(2), M_PI, 1e-14);
    EXPECT_NEAR(unit_ball_volume(3), 4.0 * M_PI / 3.0, 1e-14);
    EXPECT_THROW(unit_ball_volume(-1), StructuralError);
}

TEST(BallVolume, FlatWeightIsEuclideanBox) {
    for (int N : {1, 2, 3})
        for (double y0 : {0.0, 0.3, 7.0})
            for (double r : {0.01, 1.0, 5.0})
                EXPECT_NEAR(ball_volume(y0, r, 0.0, N), unit_ball_volume(N) * std::pow(r, N + 1),
                            1e-13 * unit_ball_volume(N) * std::pow(r, N + 1));
}

TEST(BallVolume, LinearWeightAtBoundary) {
    // 2 * int_0^1 y dy
    EXPECT_NEAR(ball_volume(0.0, 1.0, 1.0, 1), 1.0, 1e-15);
}

TEST(BallVolume, ScalesWithHomogeneousDegree) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uc(-0.9, 3.0), uy(0.0, 4.0), ur(0.05, 3.0), ul(0.1, 10.0);
    for (int i = 0; i < 200; ++i) {
        const double c = uc(rng), y0 = uy(rng), r = ur(rng), lam = ul(rng);
        for (int N : {1, 2}) {
            const double lhs = ball_volume(lam * y0, lam * r, c, N);
            const double rhs = std::pow(lam, N + 1 + c) * ball_volume(y0, r, c, N);
            EXPECT_NEAR(lhs / rhs, 1.0, 1e-12);
        }
    }
}

TEST(BallVolume, InteriorLimit) {
    // y0 >> r: the weight is nearly constant y0^c over the box
    const double c = 1.7, y0 = 1e4, r = 1e-2;
    EXPECT_NEAR(ball_volume(y0, r, c, 1) / (2.0 * r * r * std::pow(y0, c)), 1.0, 1e-5);
}

TEST(BallVolume, RejectsBadArguments) {
    EXPECT_THROW(ball_volume(1.0, 1.0, -1.0, 1), ParameterError);
    EXPECT_THROW(ball_volume(-1.0, 1.0, 0.0, 1), DomainError);
    EXPECT_THROW(ball_volume(1.0, 0.0, 0.0, 1), DomainError);
}

TEST(EnvelopeShape, ProductAtParabolicScale) {
    for (double t : {0.25, 1.0, 4.0})
        for (double c : {-0.5, 0.0, 2.0}) {
            const Point z = Point::planar(0.3, std::sqrt(t));
            const double v = envelope_shape(EnvelopeForm::product, t, z, z, c, 1);
            EXPECT_NEAR(v, std::pow(t, -0.5 * (2.0 + c)), 1e-13 * v);
        }
}

TEST(EnvelopeShape, OneSidedFlatWeight) {
    const Point z1 = Point::planar(0.0, 0.1), z2 = Point::planar(1.0, 3.0);
    for (double t : {0.5, 2.0}) {
        EXPECT_NEAR(envelope_shape(EnvelopeForm::one_sided_2, t, z1, z2, 0.0, 1), 1.0 / t, 1e-15);
        EXPECT_NEAR(envelope_shape(EnvelopeForm::one_sided_1, t, z1, z2, 0.0, 1), 1.0 / t, 1e-15);
    }
}

TEST(EnvelopeShape, BoundaryWeightSaturates) {
    // below sqrt t the weight y^{-s}(y/sqrt t)^s is the constant t^{-s/2}
    const double t = 4.0, c = 1.5;
    const Point z2 = Point::planar(0.0, 1.0);
    const double a = envelope_shape(EnvelopeForm::one_sided_1, t, Point::planar(0.0, 0.01), z2, c, 1);
    const double b = envelope_shape(EnvelopeForm::one_sided_1, t, Point::planar(0.0, 1.9), z2, c, 1);
    EXPECT_NEAR(a / b, 1.0, 1e-12);
}

TEST(EnvelopeShape, VolumeFormEquivalentToProduct) {
    // 1/sqrt(V1 V2) and the product weight differ by a bounded factor
    for (double c : {-0.5, 0.0, 1.0, 3.0}) {
        double lo = 1e300, hi = 0.0;
        for (double t : {0.1, 1.0, 10.0})
            for (int i = 0; i < 30; ++i)
                for (int j = 0; j < 30; ++j) {
                    const Point z1 = Point::planar(0.0, std::pow(10.0, -3.0 + 0.2 * i));
                    const Point z2 = Point::planar(0.0, std::pow(10.0, -3.0 + 0.2 * j));
                    const double r = envelope_shape(EnvelopeForm::volume, t, z1, z2, c, 1) /
                                     envelope_shape(EnvelopeForm::product, t, z1, z2, c, 1);
                    lo = std::min(lo, r);
                    hi = std::max(hi, r);
                }
        EXPECT_GT(lo, 0.0) << c;
        EXPECT_LT(hi / lo, 1e3) << c;
    }
}

TEST(EnvelopeEval, GaussianFactor) {
    const EnvelopeParams e{2.0, 4.0, EnvelopeForm::product, EnvelopeSide::upper};
    const Point z1 = Point::planar(1.0, 1.0), z2 = Point::planar(-1.0, 1.0);
    const double base = envelope_shape(EnvelopeForm::product, 1.0, z1, z2, 0.0, 1);
    EXPECT_NEAR(envelope_eval(e, 1.0, z1, z2, 0.0, 1), 2.0 * base * std::exp(-1.0), 1e-15);
    EXPECT_THROW(envelope_eval({0.0, 4.0}, 1.0, z1, z2, 0.0, 1), ParameterError);
    EXPECT_THROW(envelope_eval(e, 0.0, z1, z2, 0.0, 1), DomainError);
    EXPECT_THROW(envelope_eval(e, 1.0, Point::planar(0.0, 0.0), z2, 0.0, 1), DomainError);
}

TEST(GradientEnvelope, FlatWeightAndTimeRatio) {
    const Point z = Point::planar(0.0, 2.0);
    EXPECT_NEAR(gradient_envelope(1.0, z, z, 0.0, 1, 3.0, 4.0), 3.0, 1e-15);
    for (double t : {0.25, 1.0, 9.0}) {
        const double g = gradient_envelope_shape(t, z, z, 0.0, 1);
        const double p = envelope_shape(EnvelopeForm::one_sided_2, t, z, z, 0.0, 1);
        EXPECT_NEAR(g / p, 1.0 / std::sqrt(t), 1e-14);
    }
    EXPECT_THROW(gradient_envelope(1.0, z, z, 0.0, 1, 1.0, 0.0), ParameterError);
}

TEST(EquivalenceWindow, FlatWeightIsTrivial) {
    const EquivalenceWindow w = envelope_equivalence_window(0.0, 0.1);
    EXPECT_DOUBLE_EQ(w.upper, 1.0);
    EXPECT_DOUBLE_EQ(w.lower, 1.0);
}

TEST(EquivalenceWindow, FiniteForPositiveShift) {
    for (double c : {-0.5, 1.0, 2.0}) {
        const EquivalenceWindow w = envelope_equivalence_window(c, 0.1);
        EXPECT_TRUE(std::isfinite(w.upper));
        EXPECT_GE(w.upper, 1.0);
        EXPECT_LE(w.lower, 1.0);
        EXPECT_GT(w.lower, 0.0);
    }
    EXPECT_THROW(envelope_equivalence_window(1.0, 0.0), ParameterError);
}

TEST(Doubling, FlatWeight) {
    for (int N : {1, 2}) {
        const DoublingReport d = doubling_check(0.0, N);
        EXPECT_NEAR(d.worst, std::pow(2.0, N + 1), 1e-12);
        EXPECT_TRUE(d.consistent);
    }
}

TEST(Doubling, BoundaryAndInteriorRatios) {
    for (double c : {-0.5, 1.0, 2.5}) {
        EXPECT_NEAR(ball_volume(0.0, 2.0, c, 1) / ball_volume(0.0, 1.0, c, 1), std::pow(2.0, 2.0 + c), 1e-12);
        EXPECT_NEAR(ball_volume(1e6, 2e-3, c, 1) / ball_volume(1e6, 1e-3, c, 1), 4.0, 1e-6);
        const DoublingReport d = doubling_check(c, 1);
        EXPECT_TRUE(d.consistent) << c;
        EXPECT_LE(d.worst, d.shape_bound * (1.0 + 1e-12));
    }
    EXPECT_THROW(doubling_check(-1.0, 1), ParameterError);
}
