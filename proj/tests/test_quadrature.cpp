#include <catch_amalgamated.hpp>

#include <cmath>

#include "nonplanar/quadrature.hpp"

using namespace nonplanar;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("Gauss-Legendre rules are exact for degree 2n-1") {
    for (int n : {1, 2, 5, 10, 20}) {
        const quad::Rule r = quad::gauss_legendre(n);
        double wsum = 0.0;
        for (double w : r.weights) wsum += w;
        REQUIRE_THAT(wsum, WithinAbs(2.0, 1e-14));
        for (int p = 0; p <= 2 * n - 1; ++p) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += r.weights[i] * std::pow(r.nodes[i], p);
            const double exact = (p % 2 == 1) ? 0.0 : 2.0 / (p + 1);
            CHECK_THAT(s, WithinAbs(exact, 1e-13));
        }
    }
}

TEST_CASE("adaptive quadrature reaches its absolute tolerance") {
    const auto r = quad::adaptive([](double x) { return std::exp(x); }, 0.0, 2.0);
    CHECK_THAT(r.value, WithinAbs(std::exp(2.0) - 1.0, 1e-12));
    // 40 periods
    const auto osc = quad::adaptive([](double x) { return std::sin(x) * std::sin(x); }, 0.0, 80.0 * pi, 1e-11, 16);
    CHECK_THAT(osc.value, WithinAbs(40.0 * pi, 1e-10));
    // integrable endpoint singularity
    const auto sing = quad::adaptive([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, 1e-9);
    CHECK_THAT(sing.value, WithinAbs(2.0, 1e-8));
}

TEST_CASE("adaptive quadrature reports non-convergence") {
    CHECK_THROWS_AS(quad::adaptive([](double x) { return 1.0 / x; }, 0.0, 1.0, 1e-12), ToleranceError);
}

TEST_CASE("two-dimensional adaptive quadrature over a disk") {
    auto lo = [](double x) { return -std::sqrt(std::max(0.0, 1.0 - x * x)); };
    auto hi = [](double x) { return std::sqrt(std::max(0.0, 1.0 - x * x)); };
    const auto area = quad::adaptive_2d([](double, double) { return 1.0; }, -1.0, 1.0, lo, hi, 1e-9, 4);
    CHECK_THAT(area.value, WithinRel(pi, 1e-8));
    const auto moment = quad::adaptive_2d([](double x, double y) { return x * x + y * y; }, -1.0, 1.0, lo, hi, 1e-9, 4);
    CHECK_THAT(moment.value, WithinRel(pi / 2.0, 1e-8));
}
