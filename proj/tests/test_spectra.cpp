#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "nonplanar/quadrature.hpp"
#include "nonplanar/spectra.hpp"
#include "synthetic.hpp"

using namespace nonplanar;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double moment(SpacingModel m, int k, double rho1 = 0.0) {
    auto f = [&](double s) { return std::pow(s, k) * spacing_pdf(m, s, rho1); };
    return quad::adaptive(f, 0.0, 40.0, 1e-12, 40).value;
}

std::vector<double> poisson_sample(std::size_t n, std::uint64_t seed) {
    CounterRng rng(seed);
    std::vector<double> s(n);
    for (double& x : s) x = -std::log(1.0 - rng.uniform());
    return s;
}

}  // namespace

TEST_CASE("spacing densities are normalized with unit mean") {
    for (SpacingModel m : {SpacingModel::poisson, SpacingModel::goe, SpacingModel::goe2}) {
        INFO(to_string(m));
        CHECK_THAT(moment(m, 0), WithinAbs(1.0, 1e-9));
        CHECK_THAT(moment(m, 1), WithinAbs(1.0, 1e-9));
    }
    for (double rho : {0.0, 0.09, 0.3, 0.7, 1.0}) {
        INFO("rho1 = " << rho);
        CHECK_THAT(moment(SpacingModel::berry_robnik, 0, rho), WithinAbs(1.0, 1e-9));
        CHECK_THAT(moment(SpacingModel::berry_robnik, 1, rho), WithinAbs(1.0, 1e-9));
    }
}

TEST_CASE("the printed two-class density is not normalized") {
    CHECK(std::abs(moment(SpacingModel::goe2_printed, 0) - 1.0) > 1e-2);
}

TEST_CASE("Berry-Robnik reduces to its limits") {
    for (double s : {0.0, 0.3, 1.0, 2.5}) {
        CHECK_THAT(spacing_pdf(SpacingModel::berry_robnik, s, 1.0), WithinAbs(spacing_pdf(SpacingModel::poisson, s), 1e-15));
        CHECK_THAT(spacing_pdf(SpacingModel::berry_robnik, s, 0.0), WithinAbs(spacing_pdf(SpacingModel::goe, s), 1e-15));
    }
    // level repulsion is lost as soon as rho1 > 0: P(0) = 2 rho1 - rho1^2
    CHECK_THAT(spacing_pdf(SpacingModel::berry_robnik, 0.0, 0.3), WithinAbs(0.6 - 0.09, 1e-15));
    CHECK_THROWS_AS(spacing_pdf(SpacingModel::berry_robnik, 1.0, 1.5), DomainError);
    CHECK_THROWS_AS(spacing_pdf(SpacingModel::goe, -1.0), DomainError);
}

TEST_CASE("tabulated CDF matches direct integration") {
    for (SpacingModel m : {SpacingModel::poisson, SpacingModel::goe, SpacingModel::goe2}) {
        for (double s : {0.0123, 0.5, 1.337, 3.0}) {
            const double ref = quad::adaptive([&](double x) { return spacing_pdf(m, x); }, 0.0, s, 1e-13, 4).value;
            CHECK_THAT(spacing_cdf(m, s), WithinAbs(ref, 1e-10));
        }
    }
    CHECK_THAT(spacing_cdf(SpacingModel::poisson, 2.0), WithinAbs(1.0 - std::exp(-2.0), 1e-10));
    CHECK_THAT(spacing_cdf(SpacingModel::goe, 1.0), WithinAbs(1.0 - std::exp(-pi / 4), 1e-10));
}

TEST_CASE("KS distance separates Poisson and GOE samples") {
    const auto p = poisson_sample(4000, 8);
    const auto g = synthetic::berry_robnik_spacings(0.0, 4000, 9);
    CHECK(ks_distance(p, SpacingModel::poisson) < 0.03);
    CHECK(ks_distance(p, SpacingModel::goe) > 0.1);
    CHECK(ks_distance(g, SpacingModel::goe) < 0.03);
    CHECK(ks_distance(g, SpacingModel::poisson) > 0.1);
    CHECK_THROWS_AS(ks_distance({}, SpacingModel::goe), DomainError);
}

TEST_CASE("synthetic superposition follows Berry-Robnik") {
    const auto s = synthetic::berry_robnik_spacings(0.3, 5000, 21);
    REQUIRE(s.size() == 5000);
    CHECK(ks_distance(s, SpacingModel::berry_robnik, 0.3) < 0.025);
    const FitResult fit = fit_berry_robnik(s);
    CHECK_THAT(fit.rho1, WithinAbs(0.3, 0.05));
    CHECK(fit.rho1_low <= fit.rho1);
    CHECK(fit.rho1_high >= fit.rho1);
    CHECK(fit.rho1_high - fit.rho1_low < 0.2);
    CHECK_THROWS_AS(fit_berry_robnik(std::vector<double>(100, 1.0)), DomainError);
}

TEST_CASE("histogram density has unit area") {
    const auto p = poisson_sample(2000, 3);
    const Histogram h = histogram(p);
    double area = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < h.density.size(); ++b) {
        area += h.density[b] * h.width;
        count += h.counts[b];
    }
    CHECK_THAT(area, WithinAbs(1.0, 1e-12));
    CHECK(count == p.size());
    CHECK(h.edges.size() == h.counts.size() + 1);
}

TEST_CASE("staircase and Weyl counting") {
    const Spectrum s = make_spectrum({3.0, 1.0, 2.0, 2.0}, "test", {"c", "a", "b1", "b2"});
    CHECK(s.levels == std::vector<double>{1.0, 2.0, 2.0, 3.0});
    CHECK(s.provenance == std::vector<std::string>{"a", "b1", "b2", "c"});
    CHECK(staircase(s, 0.5) == 0);
    CHECK(staircase(s, 2.0) == 3);
    CHECK(staircase(s, 10.0) == 4);
    CHECK_THAT(weyl_staircase(10.0, 2.0, 6.0), WithinRel(2.0 / (4 * pi) * 20.0, 1e-15));
    CHECK_THAT(weyl_staircase(10.0, 2.0, 6.0, true),
               WithinRel(2.0 / (4 * pi) * 20.0 - 6.0 / (4 * pi) * std::sqrt(20.0), 1e-15));
    CHECK_THROWS_AS(weyl_staircase(-1.0, 1.0, 1.0), DomainError);
}

TEST_CASE("unfolding a rectangle spectrum gives unit mean spacing") {
    std::vector<double> e;
    const double lx = 1.0, ly = (1.0 + std::sqrt(5.0)) / 2;
    for (int m = 1; m < 80; ++m)
        for (int n = 1; n < 80; ++n) e.push_back(0.5 * (square(m * pi / lx) + square(n * pi / ly)));
    std::sort(e.begin(), e.end());
    e.resize(1500);
    const Spectrum s = make_spectrum(e, "planar");
    for (UnfoldMethod method : {UnfoldMethod::weyl_fit, UnfoldMethod::mean_density}) {
        const SpacingSample u = unfold(s, method);
        REQUIRE(u.spacings.size() == 1499);
        const double mean = std::accumulate(u.spacings.begin(), u.spacings.end(), 0.0) / u.spacings.size();
        CHECK_THAT(mean, WithinAbs(1.0, 1e-12));
        for (double x : u.spacings) CHECK(x >= 0.0);
    }
    // an integrable rectangle looks Poissonian
    const SpacingSample u = unfold(s);
    CHECK(ks_distance(u.spacings, SpacingModel::poisson) < ks_distance(u.spacings, SpacingModel::goe));
    // Weyl fit leading coefficient ~ area / (2 pi)
    CHECK_THAT(u.fit_coefficients[0], WithinRel(lx * ly / (2 * pi), 0.02));
    CHECK_THROWS_AS(unfold(make_spectrum({1.0, 2.0, 3.0}, "short")), DomainError);
}

TEST_CASE("trusted prefix stops where the staircase breaks away") {
    std::vector<double> e;
    for (int i = 1; i <= 400; ++i) e.push_back(static_cast<double>(i));
    // tail levels run far too sparse, as from an unconverged solver
    for (int i = 1; i <= 200; ++i) e.push_back(400.0 + 10.0 * i);
    const Spectrum s = make_spectrum(e, "test");
    const std::size_t n = trusted_prefix(s, 0.02, 50);
    CHECK(n >= 400);
    CHECK(n < 440);
    CHECK(trusted_prefix(make_spectrum({1, 2, 3}, "t"), 0.02, 50) == 3);
}
