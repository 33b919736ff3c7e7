#pragma once

#include <cmath>
#include <limits>

#include "errors.hpp"

namespace hkb {

/// log Gamma(x) for x > 0.
inline double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("log_gamma: argument must be positive and finite");
    return std::lgamma(x);
}

namespace detail {

constexpr double bessel_switch = 30.0;

// sum_k (x/2)^{2k} / (k! Gamma(k+nu+1)) * Gamma(nu+1); first term 1.
inline double bessel_series_sum(double nu, double x) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 2000; ++k) {
        term *= q / (k * (k + nu));
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

// Hankel expansion of sqrt(2 pi x) e^{-x} I_nu(x); false if the terms start growing
// before reaching double precision.
inline bool bessel_hankel_sum(double nu, double x, double& out) {
    const double mu = 4.0 * nu * nu;
    double term = 1.0;
    double sum = 1.0;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k < 200; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= -(mu - odd * odd) / (k * 8.0 * x);
        const double mag = std::abs(term);
        if (mag > prev) return false;
        sum += term;
        if (mag < 1e-17 * std::abs(sum)) {
            out = sum;
            return true;
        }
        prev = mag;
    }
    return false;
}

inline void check_order(double nu) {
    if (!(nu > -1.0) || !std::isfinite(nu)) throw ParameterError("Bessel order must satisfy nu > -1");
}

} // namespace detail

/// x^{-nu} e^{-x} I_nu(x), an entire function of x^2 with value 2^{-nu}/Gamma(nu+1) at 0.
/// Finite for every x >= 0, which is what the kernel formula needs.
inline double bessel_i_reduced(double nu, double x) {
    detail::check_order(nu);
    if (!(x >= 0.0) || std::isnan(x)) throw DomainError("bessel_i_reduced: x must be nonnegative");
    if (x <= detail::bessel_switch) {
        const double log_lead = -nu * std::log(2.0) - log_gamma(nu + 1.0) - x;
        return std::exp(log_lead) * detail::bessel_series_sum(nu, x);
    }
    double h;
    if (detail::bessel_hankel_sum(nu, x, h))
        return std::exp(-nu * std::log(x)) * h / std::sqrt(2.0 * M_PI * x);
    const double log_lead = -nu * std::log(2.0) - log_gamma(nu + 1.0) - x;
    return std::exp(log_lead) * detail::bessel_series_sum(nu, x);
}

/// e^{-x} I_nu(x) for real order nu > -1 and x >= 0.
/// Series for x <= 30, Hankel expansion beyond (series fallback when the expansion stalls).
inline double bessel_i_scaled(double nu, double x) {
    detail::check_order(nu);
    if (!(x >= 0.0) || std::isnan(x)) throw DomainError("bessel_i_scaled: x must be nonnegative");
    if (x == 0.0) {
        if (nu == 0.0) return 1.0;
        return nu > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    if (x <= detail::bessel_switch) {
        const double log_lead = nu * std::log(0.5 * x) - log_gamma(nu + 1.0) - x;
        return std::exp(log_lead) * detail::bessel_series_sum(nu, x);
    }
    double h;
    if (detail::bessel_hankel_sum(nu, x, h)) return h / std::sqrt(2.0 * M_PI * x);
    const double log_lead = nu * std::log(0.5 * x) - log_gamma(nu + 1.0) - x;
    return std::exp(log_lead) * detail::bessel_series_sum(nu, x);
}

} // namespace hkb
