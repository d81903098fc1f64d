#pragma once

// Gauss-Legendre rules, adaptive 1D panels and nested 2D integration.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "nonplanar/core.hpp"

namespace nonplanar::quad {

struct Rule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule by Newton iteration on P_n.
inline Rule gauss_legendre(int n) {
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) {
                // one more pass for the derivative at the converged node
                p0 = 1.0;
                p1 = 0.0;
                for (int j = 1; j <= n; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
                }
                dp = n * (z * p0 - p1) / (z * z - 1.0);
                break;
            }
        }
        r.nodes[i] = -z;
        r.nodes[n - 1 - i] = z;
        r.weights[i] = r.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return r;
}

template <int N>
const Rule& gl_rule() {
    static const Rule rule = gauss_legendre(N);
    return rule;
}

template <typename F>
double apply_rule(const Rule& rule, F&& f, double a, double b) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return s * half;
}

/// Composite fixed rule on `panels` equal panels.
template <typename F>
double composite(F&& f, double a, double b, int panels, const Rule& rule = gl_rule<20>()) {
    const double w = (b - a) / panels;
    double s = 0.0;
    for (int p = 0; p < panels; ++p) s += apply_rule(rule, f, a + p * w, a + (p + 1) * w);
    return s;
}

struct Result {
    double value = 0.0;
    double error = 0.0;
    long evaluations = 0;
};

namespace detail {

template <typename F>
void adaptive_step(F& f, double a, double b, double whole, double tol, int depth, Result& out, bool& failed) {
    const Rule& rule = gl_rule<20>();
    const double m = 0.5 * (a + b);
    const double left = apply_rule(rule, f, a, m);
    const double right = apply_rule(rule, f, m, b);
    out.evaluations += 40;
    const double refined = left + right;
    const double err = std::abs(refined - whole);
    if (err <= tol || depth >= 50 || (b - a) < 1e-13 * (std::abs(a) + std::abs(b) + 1e-300)) {
        // unresolved panels are tolerated while their summed error stays in budget
        if (err > tol) failed = true;
        out.value += refined;
        out.error += err;
        return;
    }
    adaptive_step(f, a, m, left, 0.5 * tol, depth + 1, out, failed);
    adaptive_step(f, m, b, right, 0.5 * tol, depth + 1, out, failed);
}

}  // namespace detail

/// Adaptive 20-point Gauss-Legendre bisection to an absolute tolerance.
/// Throws ToleranceError when a panel cannot be resolved.
template <typename F>
Result adaptive(F&& f, double a, double b, double tol_abs = 1e-12, int initial_panels = 1) {
    Result out;
    if (a == b) return out;
    bool failed = false;
    const double w = (b - a) / initial_panels;
    for (int p = 0; p < initial_panels; ++p) {
        const double lo = a + p * w;
        const double hi = (p + 1 == initial_panels) ? b : lo + w;
        const double whole = apply_rule(gl_rule<20>(), f, lo, hi);
        out.evaluations += 20;
        detail::adaptive_step(f, lo, hi, whole, tol_abs / initial_panels, 0, out, failed);
    }
    if (failed && out.error > tol_abs)
        throw ToleranceError("adaptive quadrature did not converge on [" + std::to_string(a) + ", " +
                             std::to_string(b) + "], achieved error " + std::to_string(out.error));
    return out;
}

/// Nested adaptive integration of f(x, y) over x in [x0, x1], y in [ylo(x), yhi(x)].
template <typename F, typename Lo, typename Hi>
Result adaptive_2d(F&& f, double x0, double x1, Lo&& ylo, Hi&& yhi, double tol_abs = 1e-10, int initial_panels = 1) {
    long inner_evals = 0;
    const double inner_tol = 0.1 * tol_abs / std::max(x1 - x0, 1e-300);
    auto outer = [&](double x) {
        const double lo = ylo(x);
        const double hi = yhi(x);
        if (hi <= lo) return 0.0;
        auto fy = [&](double y) { return f(x, y); };
        const Result r = adaptive(fy, lo, hi, inner_tol, initial_panels);
        inner_evals += r.evaluations;
        return r.value;
    };
    Result r = adaptive(outer, x0, x1, 0.5 * tol_abs, initial_panels);
    r.evaluations += inner_evals;
    return r;
}

}  // namespace nonplanar::quad
