#include <catch_amalgamated.hpp>

#include <cmath>

#include "basis_oracle.hpp"
#include "nonplanar/basis.hpp"
#include "nonplanar/fdm.hpp"

using namespace nonplanar;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BilliardDomain bump(double lx, double ly, double volume, double sigma, Vec2 center, double field = 0.0) {
    return {Contour::rectangle(lx, ly), SurfaceProfile::gaussian(volume, sigma, center), field, -1.0};
}

}  // namespace

TEST_CASE("basis index is ordered by planar energy") {
    const BasisIndex ix(1.0, 1.3, 80);
    REQUIRE(ix.size() == 80);
    for (int u = 0; u < ix.size(); ++u) {
        const BasisState& s = ix[u];
        CHECK_THAT(s.eps, WithinRel(0.5 * (s.kx * s.kx + s.ky * s.ky), 1e-15));
        CHECK_THAT(s.kx, WithinRel(s.m * pi / 1.0, 1e-15));
        CHECK_THAT(s.ky, WithinRel(s.n * pi / 1.3, 1e-15));
        CHECK(ix.find(s.m, s.n) == u);
        if (u > 0) CHECK(ix[u - 1].eps <= s.eps);
    }
    CHECK(ix.find(ix.max_m() + 1, 1) == -1);
    // every state below the largest kept energy is present
    for (int m = 1; m <= ix.max_m(); ++m)
        for (int n = 1; n <= ix.max_n(); ++n)
            if (0.5 * (square(m * pi) + square(n * pi / 1.3)) < ix[79].eps) CHECK(ix.find(m, n) >= 0);
}

TEST_CASE("basis states are orthonormal on the rectangle") {
    const BasisIndex ix(1.0, 1.3, 12);
    for (int u = 0; u < 12; u += 3)
        for (int v = 0; v < 12; v += 2) {
            auto f = [&](double x, double y) { return ix.value(u, x, y) * ix.value(v, x, y); };
            const double s = quad::adaptive_2d(f, 0.0, 1.0, [](double) { return 0.0; }, [](double) { return 1.3; },
                                               1e-12, 8)
                                 .value;
            CHECK_THAT(s, WithinAbs(u == v ? 1.0 : 0.0, 1e-10));
        }
}

TEST_CASE("one-dimensional integrals: closed forms and the alpha derivative") {
    const IntegralTable t(1.0, 1.3, {0.2, 0.9});
    const double k1 = pi, k2 = 2 * pi, k3 = 3 * pi;
    CHECK_THAT(t.integral(TrigFamily::ss, 0, 0, 0.0, k2, k2), WithinAbs(0.5, 1e-13));
    CHECK_THAT(t.integral(TrigFamily::ss, 0, 0, 0.0, k1, k3), WithinAbs(0.0, 1e-13));
    // int_0^1 sin(pi x) cos(2 pi x) dx = -2/(3 pi)
    CHECK_THAT(t.integral(TrigFamily::sc, 0, 0, 0.0, k1, k2), WithinAbs(-2.0 / (3 * pi), 1e-13));
    // I_{q+2}(alpha) = -d/dalpha I_q(alpha)
    for (int q : {0, 1, 3}) {
        for (TrigFamily fam : {TrigFamily::ss, TrigFamily::sc}) {
            const double a = 1.7, h = 1e-4;
            const double dfd = (t.integral(fam, 1, q, a + h, k1 / 1.3, k3 / 1.3) -
                                t.integral(fam, 1, q, a - h, k1 / 1.3, k3 / 1.3)) /
                               (2 * h);
            CHECK_THAT(t.integral(fam, 1, q + 2, a, k1 / 1.3, k3 / 1.3), WithinAbs(-dfd, 1e-7));
        }
    }
    CHECK_THROWS_AS(t.integral(TrigFamily::ss, 2, 0, 1.0, k1, k1), DomainError);
    CHECK_THROWS_AS(t.integral(TrigFamily::ss, 0, -1, 1.0, k1, k1), DomainError);
}

TEST_CASE("tabulated integrals match the adaptive ones") {
    const BilliardDomain d = bump(1.0, 1.3, 1.0, 0.6, {0.3, 0.0});
    const BasisModel model(d, 60);
    const IntegralTable& t = model.table();
    CounterRng rng(3);
    for (int k = 0; k < 60; ++k) {
        const int axis = k % 2;
        const int slot = static_cast<int>(rng.uniform() * 6);
        const int q = static_cast<int>(rng.uniform() * (t.qmax(slot) + 1));
        const int mu = 1 + static_cast<int>(rng.uniform() * 8), mv = 1 + static_cast<int>(rng.uniform() * 8);
        const double L = axis == 0 ? 1.0 : 1.3;
        const double a = t.alpha(slot);
        CHECK_THAT(t.ss(axis, slot, q, mu, mv),
                   WithinAbs(t.integral(TrigFamily::ss, axis, q, a, mu * pi / L, mv * pi / L), 1e-12));
        CHECK_THAT(t.sc(axis, slot, q, mu, mv),
                   WithinAbs(t.integral(TrigFamily::sc, axis, q, a, mu * pi / L, mv * pi / L), 1e-12));
    }
}

TEST_CASE("series elements agree with direct quadrature, term by term") {
    const std::vector<BilliardDomain> domains = {
        bump(1.0, 1.3, 1.0, 0.8, {0.0, 0.0}, 2.0),
        bump(1.0, 1.0, 1.0, 0.5, {0.45, 0.6}, 1.0),
    };
    for (std::size_t i = 0; i < domains.size(); ++i) {
        const BasisModel model(domains[i], 40);
        CounterRng rng(CounterRng::substream(17, i));
        for (BasisTerm t : all_basis_terms) {
            for (int k = 0; k < 4; ++k) {
                const int u = static_cast<int>(rng.uniform() * 40), v = static_cast<int>(rng.uniform() * 40);
                INFO("domain " << i << " term " << to_string(t) << " <" << u << "|" << v << ">");
                const SeriesValue s = model.element(t, u, v);
                CHECK_FALSE(s.capped);
                CHECK_THAT(s.value, WithinAbs(oracle::basis_element(domains[i], model.index(), t, u, v), 1e-9));
            }
        }
    }
}

TEST_CASE("printed series variant departs from the quadrature") {
    const BilliardDomain d = bump(1.0, 1.3, 1.0, 0.8, {0.0, 0.0}, 2.0);
    BasisOptions opt;
    opt.variant = SeriesVariant::printed;
    const BasisModel printed(d, 20, opt);
    CHECK_FALSE(printed.term_active(BasisTerm::confining_cross));
    double worst = 0.0;
    for (int u = 0; u < 4; ++u)
        worst = std::max(worst, std::abs(printed.element(BasisTerm::centrifugal, u, u).value -
                                         oracle::basis_element(d, printed.index(), BasisTerm::centrifugal, u, u)));
    CHECK(worst > 1e-3);
}

TEST_CASE("sigma at or below sigma_min is rejected") {
    const double smin = sigma_min(1.0);
    CHECK_THAT(smin, WithinRel(std::cbrt(1.0 / (2 * pi * std::sqrt(std::exp(1.0)))), 1e-15));
    CHECK_THROWS_AS(BasisModel(bump(1, 1, 1.0, smin, {0.5, 0.5}), 10), DomainError);
    CHECK_THROWS_AS(BasisModel(bump(1, 1, 1.0, 0.9 * smin, {0.5, 0.5}), 10), DomainError);
    const BasisModel ok(bump(1, 1, 1.0, 1.05 * smin, {0.5, 0.5}), 10);
    CHECK(ok.series_ratio() < 1.0);
    CHECK_THAT(ok.series_ratio(), WithinRel(std::pow(1.05, -6.0), 1e-12));
    const BilliardDomain circle{Contour::circle(1.0), SurfaceProfile::gaussian(1.0, 0.8), 0.0, -1.0};
    CHECK_THROWS_AS(BasisModel(circle, 10), DomainError);
    const BilliardDomain cone{Contour::rectangle(1, 1), SurfaceProfile::cone(0.2, 0.5, {0.5, 0.5}), 0.0, -1.0};
    CHECK_THROWS_AS(BasisModel(cone, 10), DomainError);
}

TEST_CASE("flat surface gives the planar spectrum") {
    const BilliardDomain d{Contour::rectangle(1.0, 1.3), SurfaceProfile::flat(), 0.0, -1.0};
    const BasisOperator op = assemble_basis_hamiltonian(d, 30);
    CHECK(op.asymmetry == 0.0);
    const BasisSolution sol = solve_basis(op, 30);
    for (int k = 0; k < 30; ++k) CHECK_THAT(sol.eigen.values[k], WithinRel(op.index[k].eps, 1e-14));
}

TEST_CASE("enlarging the basis lowers every level (interlacing)") {
    const BilliardDomain d = bump(1.0, 1.0, 1.0, 0.8, {0.0, 0.0});
    const BasisSolution small = solve_basis(assemble_basis_hamiltonian(d, 60), 20);
    const BasisSolution large = solve_basis(assemble_basis_hamiltonian(d, 90), 20);
    for (int k = 0; k < 20; ++k) {
        CHECK(large.eigen.values[k] <= small.eigen.values[k] + 1e-12);
        CHECK_THAT(large.eigen.values[k], WithinRel(small.eigen.values[k], 5e-3));
    }
}

TEST_CASE("symmetrized and raw basis matrices give the same low levels") {
    const BilliardDomain d = bump(1.0, 1.0, 1.0, 0.8, {0.0, 0.0});
    const BasisOperator op = assemble_basis_hamiltonian(d, 100);
    CHECK(op.asymmetry > 0.0);
    CHECK(op.asymmetry < 1e-2);
    CHECK(op.capped == 0);
    const BasisSolution sym = solve_basis(op, 10);
    const BasisSolution raw = solve_basis_unsymmetrized(op, 10);
    CHECK(raw.max_imaginary < 1e-8);
    for (int k = 0; k < 10; ++k) CHECK_THAT(raw.eigen.values[k], WithinRel(sym.eigen.values[k], 1e-4));
}

TEST_CASE("basis and finite differences agree on the corner bump") {
    const BilliardDomain d = bump(1.0, 1.0, 1.0, 0.8, {0.0, 0.0});
    const BasisSolution b = solve_basis(assemble_basis_hamiltonian(d, 200), 8);
    const auto coarse = solve_fdm(assemble(d, make_grid(d.contour, 39, 39)), 8);
    const auto fine = solve_fdm(assemble(d, make_grid(d.contour, 79, 79)), 8);
    for (int k = 0; k < 8; ++k) {
        const double extrapolated = (4 * fine.eigen.values[k] - coarse.eigen.values[k]) / 3;
        CHECK_THAT(b.eigen.values[k], WithinRel(extrapolated, 2e-3));
    }
}

TEST_CASE("strong field drops the radial and centrifugal terms") {
    BasisOptions opt;
    opt.strong_field = true;
    const BasisModel m(bump(1.0, 1.0, 1.0, 0.8, {0.5, 0.5}, 30.0), 10, opt);
    CHECK_FALSE(m.term_active(BasisTerm::radial_kinetic));
    CHECK_FALSE(m.term_active(BasisTerm::centrifugal));
    CHECK(m.term_active(BasisTerm::electric));
    CHECK(m.element(BasisTerm::centrifugal, 0, 1).value == 0.0);
}

TEST_CASE("basis wavefunctions are normalized on the plane") {
    const BilliardDomain d = bump(1.0, 1.3, 1.0, 0.8, {0.5, 0.5});
    const BasisOperator op = assemble_basis_hamiltonian(d, 40);
    const BasisSolution sol = solve_basis(op, 3, true);
    const WavefunctionGrid w = basis_wavefunction(op, sol.eigen, 0, 50, 64);
    double s = 0.0;
    for (double v : w.values) s += v * v * w.hx * w.hy;
    CHECK_THAT(s, WithinAbs(1.0, 1e-12));
    CHECK(w.normalization == "sum |psi|^2 hx hy = 1");
    CHECK_THROWS_AS(basis_wavefunction(op, sol.eigen, 3, 10, 10), DomainError);
}
