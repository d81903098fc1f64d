#pragma once

// Synthetic level sequences with known spacing statistics.

#include <algorithm>
#include <cmath>
#include <vector>

#include "nonplanar/core.hpp"

namespace synthetic {

/// Spacings (mean 1) of a superposition of a Poisson sequence with density
/// rho1 and a Wigner-spacing renewal sequence with density 1 - rho1. Its gap
/// probability is exactly the Berry-Robnik one, so this samples P2(S, rho1)
/// without going through the formula.
inline std::vector<double> berry_robnik_spacings(double rho1, std::size_t n, std::uint64_t seed) {
    nonplanar::CounterRng rng(seed);
    const double burn = 50.0;
    const double length = burn + 1.2 * static_cast<double>(n) + 50.0;
    std::vector<double> levels;
    if (rho1 > 0.0) {
        double x = 0.0;
        while (true) {
            x += -std::log(1.0 - rng.uniform()) / rho1;
            if (x > length) break;
            levels.push_back(x);
        }
    }
    if (rho1 < 1.0) {
        const double scale = 1.0 / (1.0 - rho1);
        double x = -burn * scale;  // start early so the sequence is stationary at 0
        while (true) {
            const double u = 1.0 - rng.uniform();
            x += scale * std::sqrt(-4.0 * std::log(u) / nonplanar::pi);
            if (x > length) break;
            if (x > 0.0) levels.push_back(x);
        }
    }
    std::sort(levels.begin(), levels.end());
    std::vector<double> s;
    for (std::size_t i = 1; i < levels.size() && s.size() < n; ++i)
        if (levels[i - 1] > burn) s.push_back(levels[i] - levels[i - 1]);
    double mean = 0.0;
    for (double x : s) mean += x;
    mean /= static_cast<double>(s.size());
    for (double& x : s) x /= mean;
    return s;
}

}  // namespace synthetic
