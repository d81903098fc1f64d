#pragma once

// Bessel functions of the first kind for real order nu >= 0 and their
// positive zeros.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nonplanar/core.hpp"

namespace nonplanar {

struct BesselValue {
    double j = 0.0;   // J_nu(x)
    double dj = 0.0;  // J_nu'(x)
};

namespace detail {

// Ascending series, accumulated in long double. Used for x < 2 where every
// term is positive after the first few and cancellation is negligible.
inline long double bessel_series(double nu, double x) {
    const long double hx = 0.5L * x;
    const long double q = -hx * hx;
    long double term = std::exp(nu * std::log(hx) - std::lgamma(nu + 1.0L));
    long double sum = term;
    for (int k = 1; k < 200; ++k) {
        term *= q / (static_cast<long double>(k) * (nu + k));
        sum += term;
        if (std::abs(term) < 1e-21L * std::abs(sum)) break;
    }
    return sum;
}

// Steed's method: CF1 for J'/J at order nu, downward recurrence to
// mu in [-1/2, 1/2), CF2 for (Y + iJ) ratios, then the Wronskian fixes the
// normalization. Valid for x >= 2.
inline BesselValue bessel_steed(double nu, double x) {
    constexpr double eps = 1e-16;
    constexpr double fpmin = 1e-300;
    constexpr int maxit = 1000000;
    const int nl = std::max(0, static_cast<int>(nu - x + 1.5));
    const double mu = nu - nl;
    const double mu2 = mu * mu;
    const double xi = 1.0 / x;
    const double xi2 = 2.0 * xi;
    const double w = xi2 / pi;

    int isign = 1;
    double h = nu * xi;
    if (h < fpmin) h = fpmin;
    double b = xi2 * nu;
    double d = 0.0;
    double c = h;
    int it = 0;
    for (; it < maxit; ++it) {
        b += xi2;
        d = b - d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = b - 1.0 / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = c * d;
        h *= del;
        if (d < 0.0) isign = -isign;
        if (std::abs(del - 1.0) < eps) break;
    }
    if (it == maxit) throw ToleranceError("Bessel CF1 did not converge at nu=" + std::to_string(nu) + " x=" + std::to_string(x));

    double jl = isign * fpmin;
    double jpl = h * jl;
    const double jl1 = jl;
    const double jp1 = jpl;
    double fact = nu * xi;
    for (int l = nl; l >= 1; --l) {
        const double jtemp = fact * jl + jpl;
        fact -= xi;
        jpl = fact * jtemp - jl;
        jl = jtemp;
    }
    if (jl == 0.0) jl = eps;
    const double f = jpl / jl;

    double a = 0.25 - mu2;
    double p = -0.5 * xi;
    double q = 1.0;
    const double br = 2.0 * x;
    double bi = 2.0;
    fact = a * xi / (p * p + q * q);
    double cr = br + q * fact;
    double ci = bi + p * fact;
    double den = br * br + bi * bi;
    double dr = br / den;
    double di = -bi / den;
    double dlr = cr * dr - ci * di;
    double dli = cr * di + ci * dr;
    double temp = p * dlr - q * dli;
    q = p * dli + q * dlr;
    p = temp;
    for (it = 2; it < maxit; ++it) {
        a += 2.0 * (it - 1);
        bi += 2.0;
        dr = a * dr + br;
        di = a * di + bi;
        if (std::abs(dr) + std::abs(di) < fpmin) dr = fpmin;
        fact = a / (cr * cr + ci * ci);
        cr = br + cr * fact;
        ci = bi - ci * fact;
        if (std::abs(cr) + std::abs(ci) < fpmin) cr = fpmin;
        den = dr * dr + di * di;
        dr /= den;
        di = -di / den;
        dlr = cr * dr - ci * di;
        dli = cr * di + ci * dr;
        temp = p * dlr - q * dli;
        q = p * dli + q * dlr;
        p = temp;
        if (std::abs(dlr - 1.0) + std::abs(dli) < eps) break;
    }
    if (it == maxit) throw ToleranceError("Bessel CF2 did not converge at nu=" + std::to_string(nu) + " x=" + std::to_string(x));

    const double gam = (p - f) / q;
    double jmu = std::sqrt(w / ((p - f) * gam + q));
    jmu = std::copysign(jmu, jl);
    const double scale = jmu / jl;
    return {jl1 * scale, jp1 * scale};
}

}  // namespace detail

/// J_nu(x) and its derivative for nu >= 0, x >= 0.
inline BesselValue bessel_j_with_derivative(double nu, double x) {
    if (!(nu >= 0.0) || !(x >= 0.0)) throw DomainError("bessel_j requires order >= 0 and x >= 0");
    if (x == 0.0) {
        if (nu == 0.0) return {1.0, 0.0};
        if (nu == 1.0) return {0.0, 0.5};
        return {0.0, nu < 1.0 ? std::numeric_limits<double>::infinity() : 0.0};
    }
    if (x < 2.0) {
        const long double j = detail::bessel_series(nu, x);
        const long double j1 = detail::bessel_series(nu + 1.0, x);
        return {static_cast<double>(j), static_cast<double>(nu / x * j - j1)};
    }
    return detail::bessel_steed(nu, x);
}

inline double bessel_j(double nu, double x) { return bessel_j_with_derivative(nu, x).j; }

namespace detail {

// Bisection on a sign-change bracket, then Newton steps kept inside it.
inline double refine_bessel_zero(double nu, double lo, double hi) {
    double flo = bessel_j(nu, lo);
    for (int i = 0; i < 60 && hi - lo > 1e-4 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = bessel_j(nu, mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 50; ++i) {
        const BesselValue v = bessel_j_with_derivative(nu, x);
        if (v.j == 0.0) return x;
        if ((v.j < 0.0) == (flo < 0.0))
            lo = x;
        else
            hi = x;
        double next = x - v.j / v.dj;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double dx = std::abs(next - x);
        x = next;
        if (dx < 1e-15 * x) return x;
    }
    if (hi - lo < 1e-12 * x) return x;
    throw ToleranceError("Bessel zero refinement stalled for nu=" + std::to_string(nu) + " in [" + std::to_string(lo) +
                         ", " + std::to_string(hi) + "]");
}

}  // namespace detail

/// Positive zeros of J_nu, ascending. Stops after `count` zeros or at the
/// first zero beyond `x_max`, whichever comes first.
inline std::vector<double> bessel_zeros(double nu, int count, double x_max = std::numeric_limits<double>::infinity()) {
    if (!(nu >= 0.0)) throw DomainError("bessel_zeros requires order >= 0");
    std::vector<double> zeros;
    if (count <= 0) return zeros;
    // j_{nu,1} > nu + 1.8557 nu^{1/3} asymptotically; the 0.95 factor keeps the
    // start below the first zero for all nu, and J_nu has no zeros below 2.4.
    double x = nu >= 1.0 ? nu + 0.95 * 1.8557571 * std::cbrt(nu) : 1.0;
    // Consecutive zeros are more than 3 apart, so a 0.5 step cannot skip one.
    constexpr double step = 0.5;
    double fx = bessel_j(nu, x);
    const double scan_limit = std::isfinite(x_max) ? x_max + 4.0 : 1e7;
    while (static_cast<int>(zeros.size()) < count) {
        if (x > scan_limit) {
            if (std::isfinite(x_max)) break;
            throw ToleranceError("Bessel zero scan for nu=" + std::to_string(nu) + " found no bracket below " +
                                 std::to_string(scan_limit));
        }
        const double xn = x + step;
        const double fn = bessel_j(nu, xn);
        if (fx == 0.0 && x > 0.0) {
            zeros.push_back(x);
        } else if ((fx < 0.0) != (fn < 0.0) && fn != 0.0) {
            zeros.push_back(detail::refine_bessel_zero(nu, x, xn));
        } else {
            x = xn;
            fx = fn;
            continue;
        }
        if (zeros.back() > x_max) {
            zeros.pop_back();
            break;
        }
        x = zeros.back() + 2.5;
        fx = bessel_j(nu, x);
    }
    return zeros;
}

/// s-th positive zero of J_nu (s >= 1).
inline double bessel_zero(double nu, int s) {
    if (s < 1) throw DomainError("Bessel zero index must be >= 1");
    return bessel_zeros(nu, s).back();
}

}  // namespace nonplanar
