#include <cmath>
#include <random>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include "hkb/special_functions.hpp"

using namespace hkb;

namespace {

using big = boost::multiprecision::cpp_bin_float_50;

// e^{-x} I_nu(x) from the defining power series in 50-digit arithmetic.
double scaled_oracle(double nu, double x) {
    const big bx(x), q = bx * bx / 4;
    big term = boost::multiprecision::pow(bx / 2, big(nu)) / boost::math::tgamma(big(nu) + 1);
    big sum = term;
    for (int k = 1; k < 5000; ++k) {
        term *= q / (big(k) * (big(k) + nu));
        sum += term;
        if (term < sum * big("1e-40")) break;
    }
    return static_cast<double>(sum * boost::multiprecision::exp(-bx));
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace

TEST(BesselScaled, MatchesHighPrecisionSeries) {
    for (double nu : {-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.5, 5.0})
        for (double x : {1e-3, 0.1, 1.0, 5.0, 10.0, 29.9, 30.1, 50.0, 100.0, 300.0, 700.0})
            EXPECT_LE(rel(bessel_i_scaled(nu, x), scaled_oracle(nu, x)), 1e-10) << "nu=" << nu << " x=" << x;
}

TEST(BesselScaled, HalfIntegerClosedForms) {
    for (double x : {0.5, 1.0, 10.0}) {
        const double pre = std::sqrt(2.0 / (M_PI * x)) * std::exp(-x);
        EXPECT_LE(rel(bessel_i_scaled(0.5, x), pre * std::sinh(x)), 1e-13);
        EXPECT_LE(rel(bessel_i_scaled(-0.5, x), pre * std::cosh(x)), 1e-13);
    }
}

TEST(BesselScaled, OrderZeroAtOne) {
    // I_0(1) = sum (1/2)^{2k} / (k!)^2
    double s = 0.0, term = 1.0;
    for (int k = 0; k < 30; ++k) {
        s += term;
        term *= 0.25 / ((k + 1.0) * (k + 1.0));
    }
    EXPECT_NEAR(s, 1.2660658, 1e-7);
    EXPECT_NEAR(bessel_i_scaled(0.0, 1.0), s * std::exp(-1.0), 1e-15);
    EXPECT_NEAR(bessel_i_scaled(0.0, 1.0), 0.4657596, 1e-7);
}

TEST(BesselScaled, ValuesAtZero) {
    EXPECT_EQ(bessel_i_scaled(0.0, 0.0), 1.0);
    EXPECT_EQ(bessel_i_scaled(0.7, 0.0), 0.0);
    EXPECT_EQ(bessel_i_scaled(3.0, 0.0), 0.0);
}

TEST(BesselScaled, RejectsOrderAtOrBelowMinusOne) {
    EXPECT_THROW(bessel_i_scaled(-1.0, 1.0), ParameterError);
    EXPECT_THROW(bessel_i_scaled(-2.5, 1.0), ParameterError);
    EXPECT_THROW(bessel_i_scaled(0.5, -1.0), DomainError);
}

TEST(BesselScaled, Recurrence) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> un(0.0, 5.0), ux(0.1, 50.0);
    for (int n = 0; n < 200; ++n) {
        const double nu = un(rng), x = ux(rng);
        const double lhs = bessel_i_scaled(nu - 1.0, x);
        const double rhs = bessel_i_scaled(nu + 1.0, x) + 2.0 * nu / x * bessel_i_scaled(nu, x);
        EXPECT_LE(rel(lhs, rhs), 1e-8) << "nu=" << nu << " x=" << x;
    }
}

TEST(BesselReduced, AgreesWithScaledForm) {
    for (double nu : {-0.5, 0.0, 0.5, 1.5})
        for (double x : {0.01, 1.0, 40.0, 400.0})
            EXPECT_LE(rel(bessel_i_reduced(nu, x), std::pow(x, -nu) * bessel_i_scaled(nu, x)), 1e-13);
    EXPECT_NEAR(bessel_i_reduced(0.5, 0.0), std::pow(2.0, -0.5) / std::tgamma(1.5), 1e-15);
}

TEST(LogGamma, Values) {
    EXPECT_EQ(log_gamma(1.0), 0.0);
    EXPECT_NEAR(log_gamma(0.5), 0.5 * std::log(M_PI), 1e-15);
    EXPECT_NEAR(log_gamma(0.5), 0.5723649, 1e-7);
    EXPECT_NEAR(log_gamma(5.0), std::log(24.0), 1e-14);
    EXPECT_NEAR(log_gamma(5.0), 3.1780538, 1e-7);
}

TEST(LogGamma, AgainstBoost) {
    for (double x : {0.01, 0.3, 1.5, 7.25, 33.0, 170.5})
        EXPECT_LE(rel(log_gamma(x), boost::math::lgamma(x)), 1e-12) << x;
}

TEST(LogGamma, FunctionalEquation) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.1, 20.0);
    for (int n = 0; n < 200; ++n) {
        const double x = u(rng);
        EXPECT_LE(rel(std::exp(log_gamma(x + 1.0) - log_gamma(x)), x), 1e-12) << x;
    }
}

TEST(LogGamma, RejectsNonPositive) {
    EXPECT_THROW(log_gamma(0.0), DomainError);
    EXPECT_THROW(log_gamma(-1.5), DomainError);
}
