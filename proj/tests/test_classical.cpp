#include <catch_amalgamated.hpp>

#include <cmath>

#include "nonplanar/classical.hpp"

using namespace nonplanar;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BilliardDomain circular_cone(double slope, double radius = 1.0) {
    return {Contour::circle(radius), SurfaceProfile::cone(slope * radius, radius), 0.0, -1.0};
}

double kinetic(Vec2 p, Vec2 grad) {
    const double g2 = grad.dot(grad);
    return 0.5 * (p.dot(p) - square(grad.dot(p)) / (1.0 + g2));
}

double periodic_gap(double a, double b) {
    double d = std::abs(a - b);
    d = std::fmod(d, 1.0);
    return std::min(d, 1.0 - d);
}

}  // namespace

TEST_CASE("reflection keeps the kinetic energy and flips the normal velocity") {
    CounterRng rng(11);
    for (int k = 0; k < 200; ++k) {
        const Vec2 p{rng.normal(), rng.normal()};
        const double theta = rng.uniform(0.0, 2 * pi);
        const Vec2 n{std::cos(theta), std::sin(theta)};
        const Vec2 grad{rng.normal(), rng.normal()};
        const Vec2 q = reflect_momentum(p, n, grad);
        CHECK_THAT(kinetic(q, grad), WithinRel(kinetic(p, grad), 1e-12));
        // velocity v = G^-1 p; its normal component changes sign
        auto ginv = [&](Vec2 v) { return v - grad * (grad.dot(v) / (1.0 + grad.dot(grad))); };
        CHECK_THAT(ginv(q).dot(n), WithinAbs(-ginv(p).dot(n), 1e-12));
        CHECK_THAT(reflect_momentum(q, n, grad).x, WithinAbs(p.x, 1e-12));
    }
    const Vec2 flat = reflect_momentum({0.3, 0.4}, {1.0, 0.0}, {});
    CHECK_THAT(flat.x, WithinAbs(-0.3, 1e-15));
    CHECK_THAT(flat.y, WithinAbs(0.4, 1e-15));
}

TEST_CASE("cartesian and polar states convert both ways") {
    const BilliardDomain d{Contour::rectangle(1.0, 1.3), SurfaceProfile::gaussian(1.0, 0.5, {0.4, 0.6}), 0.0, -1.0};
    const Vec2 pos{0.7, 0.2};
    const Vec2 p{-0.35, 0.8};
    const ClassicalState s = state_from_cartesian(pos, p, 0.0, d);
    CHECK_THAT(position(s, d).x, WithinAbs(pos.x, 1e-14));
    CHECK_THAT(position(s, d).y, WithinAbs(pos.y, 1e-14));
    CHECK_THAT(cartesian_momentum(s).x, WithinAbs(p.x, 1e-14));
    CHECK_THAT(cartesian_momentum(s).y, WithinAbs(p.y, 1e-14));
    CHECK_THAT(hamiltonian(s, d), WithinRel(kinetic(p, surface_gradient(d, pos)), 1e-13));
}

TEST_CASE("cone free flight agrees with the integrator") {
    const double slope = 0.5;
    const BilliardDomain d = circular_cone(slope, 50.0);
    ClassicalState s{1.0, 0.3, -0.4, 0.7, 0.0};
    const double xi0 = 1.0 / (1.0 + slope * slope);
    const double v_r0 = xi0 * s.p_r, omega0 = s.L / (s.r * s.r);
    const double h = 1e-4;
    const ClassicalState s0 = s;
    for (int step = 1; step <= 30000; ++step) {
        s = rk4_step(s, d, h, 1e-9);
        if (step % 5000 == 0) {
            const PolarPoint ref = cone_free_flight(s0.r, s0.phi, v_r0, omega0, slope, step * h);
            CHECK_THAT(s.r, WithinAbs(ref.r, 1e-8));
            CHECK_THAT(s.phi, WithinAbs(ref.phi, 1e-8));
        }
    }
}

TEST_CASE("energy drift stays below 1e-7 over 100 collisions") {
    const std::vector<BilliardDomain> domains = {
        {Contour::rectangle(1.0, 1.0), SurfaceProfile::gaussian(1.0, 0.5, {0.5, 0.5}), 0.0, -1.0},
        {Contour::rectangle(1.0, 1.3), SurfaceProfile::gaussian(1.0, 0.6, {0.0, 0.0}), 2.0, -1.0},
        {Contour::rectangle(1.0, 1.0), SurfaceProfile::cone(0.225, 0.5, {0.5, 0.5}), 0.0, -1.0},
        {Contour::circle(1.0, {0.0, 0.0}), SurfaceProfile::cone(0.3, 0.8, {0.2, 0.1}), 0.0, -1.0},
    };
    for (std::size_t i = 0; i < domains.size(); ++i) {
        CounterRng rng(CounterRng::substream(5, i));
        const ClassicalState start = random_start(domains[i], rng, 0.5);
        const CollisionRun run = run_collisions(start, domains[i], 100);
        INFO("domain " << i);
        CHECK(run.events.size() == 100);
        CHECK(run.max_relative_drift < 1e-7);
        for (const auto& e : run.events) {
            CHECK(e.s >= 0.0);
            CHECK(e.s < 1.0);
            CHECK(std::abs(e.alpha) <= 0.5 * pi);
        }
    }
}

TEST_CASE("circular cone: incidence angle is constant and the map matches the orbit") {
    const double slope = 0.5;
    const BilliardDomain d = circular_cone(slope);
    CounterRng rng(7);
    const ClassicalState s0 = random_start(d, rng, 0.5);
    const CollisionRun run = run_collisions(s0, d, 60);
    for (const auto& e : run.events) CHECK_THAT(e.alpha, WithinAbs(run.events[0].alpha, 1e-7));

    const FlightResult first = integrate_to_collision(s0, d);
    const ConeMapStart m = cone_map_coordinates(first.after, d);
    double phi = first.after.phi;
    for (int i = 1; i < 60; ++i) {
        phi = cone_collision_map(phi, m.beta, slope, m.eps).phi;
        double s = std::fmod(phi / (2 * pi), 1.0);
        if (s < 0) s += 1.0;
        CHECK(periodic_gap(s, run.events[i].s) < 1e-7);
    }
}

TEST_CASE("circular cone: rational rotation numbers give periodic orbits") {
    const double slope = 0.5;
    const BilliardDomain d = circular_cone(slope);
    const double stretch = std::sqrt(1.0 + slope * slope);
    const std::vector<std::pair<int, int>> ratios = {{1, 2}, {1, 3}, {1, 4}, {1, 5}, {2, 5},
                                                     {1, 6}, {2, 7}, {3, 7}, {3, 8}, {4, 9}};
    for (const auto& [p, q] : ratios) {
        INFO(p << "/" << q);
        // swept angle per bounce, then the closest approach of the unrolled chord
        const double dphi = 2 * pi * p / q;
        const double theta = 0.5 * (pi - dphi / stretch);
        const double momentum = 1.0;
        const double r_min = std::sin(theta);
        const ClassicalState start{r_min, 0.0, 0.0, momentum * r_min, 0.0};

        // map only: q steps advance phi by a multiple of 2 pi
        const FlightResult first = integrate_to_collision(start, d);
        const ConeMapStart m = cone_map_coordinates(first.after, d);
        double phi = 0.0;
        for (int k = 0; k < q; ++k) phi = cone_collision_map(phi, m.beta, slope, m.eps).phi;
        CHECK_THAT(std::remainder(phi, 2 * pi), WithinAbs(0.0, 1e-9));

        const CollisionRun run = run_collisions(start, d, q + 1);
        CHECK(periodic_gap(run.events[q].s, run.events[0].s) < 1e-7);
        for (int k = 1; k < q; ++k) CHECK(periodic_gap(run.events[k].s, run.events[0].s) > 1e-3);
    }
}

TEST_CASE("canonical rescaling maps the cone to the plane") {
    const ClassicalState s{2.0, 0.4, 0.3, -0.6, 0.0};
    const RescaledState r = canonical_rescale(s, 0.75);
    const double sx = 0.8;
    CHECK_THAT(r.r, WithinRel(2.0 / sx, 1e-15));
    CHECK_THAT(r.phi, WithinRel(0.4 * sx, 1e-15));
    CHECK_THAT(r.p_r, WithinRel(0.3 * sx, 1e-15));
    CHECK_THAT(r.p_phi, WithinRel(-0.6 / sx, 1e-15));
    // p_r dr and p_phi dphi are preserved
    CHECK_THAT(r.r * r.p_r, WithinRel(s.r * s.p_r, 1e-15));
    CHECK_THAT(r.phi * r.p_phi, WithinRel(s.phi * s.L, 1e-15));
}

TEST_CASE("poincare sections are reproducible from the seed") {
    const BilliardDomain d{Contour::rectangle(1.0, 1.0), SurfaceProfile::cone(0.225, 0.5, {0.5, 0.5}), 0.0, -1.0};
    const PoincareResult a = poincare_section(d, 4, 20, 99);
    const PoincareResult b = poincare_section(d, 4, 20, 99);
    const PoincareResult c = poincare_section(d, 4, 20, 100);
    REQUIRE(a.events.size() == 80);
    REQUIRE(a.failures.empty());
    REQUIRE(b.events.size() == a.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].s == b.events[i].s);
        CHECK(a.events[i].alpha == b.events[i].alpha);
    }
    CHECK(c.events[0].s != a.events[0].s);
}

TEST_CASE("cell coverage counts distinct cells") {
    std::vector<PoincareEvent> ev = {{0, 0, 0.1, 0.0}, {0, 1, 0.12, 0.01}, {0, 2, 0.9, -1.0}};
    CHECK_THAT(cell_coverage(ev, 2, 2), WithinAbs(0.5, 1e-15));
    CHECK_THAT(cell_coverage(ev, 10, 10), WithinAbs(0.02, 1e-15));
}

TEST_CASE("cone apex outside the contour is rejected") {
    const BilliardDomain bad{Contour::rectangle(1.0, 1.0), SurfaceProfile::cone(0.2, 0.5, {1.5, 0.5}), 0.0, -1.0};
    CHECK_THROWS_AS(bad.validate(), DomainError);
    const BilliardDomain corner{Contour::rectangle(1.0, 1.0), SurfaceProfile::gaussian(1.0, 0.5, {0.0, 0.0}), 0.0, -1.0};
    CHECK_NOTHROW(corner.validate());
}
