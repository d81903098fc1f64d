#include <catch_amalgamated.hpp>

#include <boost/math/special_functions/bessel.hpp>

#include <cmath>

#include "nonplanar/bessel.hpp"

using namespace nonplanar;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("J_nu agrees with Boost across the series/continued-fraction split") {
    double worst = 0.0;
    for (double nu : {0.0, 0.3, 0.5, 1.0, 2.7, 7.75, 15.0, 40.5}) {
        for (double x = 0.05; x < 60.0; x += 0.37) {
            const double ref = boost::math::cyl_bessel_j(nu, x);
            worst = std::max(worst, std::abs(bessel_j(nu, x) - ref));
        }
    }
    CHECK(worst < 1e-11);
}

TEST_CASE("derivative satisfies J' = J_{nu-1} - nu J / x") {
    for (double nu : {1.0, 2.5, 9.0})
        for (double x : {0.7, 3.0, 12.0}) {
            const BesselValue v = bessel_j_with_derivative(nu, x);
            const double ref = boost::math::cyl_bessel_j(nu - 1, x) - nu / x * boost::math::cyl_bessel_j(nu, x);
            CHECK_THAT(v.dj, WithinAbs(ref, 1e-11));
        }
}

TEST_CASE("zeros of J_0 and J_nu for real order") {
    CHECK_THAT(bessel_zero(0.0, 1), WithinAbs(2.404825557695773, 1e-12));
    for (double nu : {0.0, 0.4, 1.0, 2.78, 11.3}) {
        const std::vector<double> z = bessel_zeros(nu, 25);
        REQUIRE(z.size() == 25);
        for (int s = 1; s <= 25; ++s)
            CHECK_THAT(z[s - 1], WithinRel(boost::math::cyl_bessel_j_zero(nu, s), 1e-12));
        for (std::size_t i = 1; i < z.size(); ++i) CHECK(z[i] > z[i - 1]);
        CHECK(z.front() > nu);  // j_{nu,1} > nu
    }
}

TEST_CASE("zeros stop at x_max and reject negative order") {
    const std::vector<double> z = bessel_zeros(1.5, 1000, 20.0);
    CHECK(z.back() <= 20.0);
    CHECK(z.size() == 5);  // 4.49, 7.73, 10.90, 14.07, 17.22
    CHECK_THROWS_AS(bessel_zeros(-0.5, 3), DomainError);
}
