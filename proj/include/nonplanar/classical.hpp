#pragma once

// Classical motion of a particle constrained to z = f(r) inside a hard-wall
// billiard. Polar coordinates (r, phi, p_r) about the surface center with L
// carried as a constant between collisions; RK4 with wall events located by
// bisection on the step length.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nonplanar/core.hpp"
#include "nonplanar/geometry.hpp"

namespace nonplanar {

struct BilliardDomain {
    Contour contour;
    SurfaceProfile surface;
    double field = 0.0;    // E0 >= 0
    double charge = -1.0;  // q

    void validate() const {
        if (!(field >= 0.0)) throw DomainError("field strength E0 must be >= 0");
        // a bump may sit on the wall or outside it; a cone apex may not
        if (surface.is_cone() && !(contour.signed_distance(surface.center()) > 0.0))
            throw DomainError("cone apex must lie strictly inside the contour");
    }

    /// Electric potential energy V = -q E0 f.
    double potential(double r) const {
        if (field == 0.0) return 0.0;
        return -charge * field * surface.height(r);
    }
};

struct ClassicalState {
    double r = 0.0;
    double phi = 0.0;
    double p_r = 0.0;
    double L = 0.0;
    double t = 0.0;
};

struct CollisionEvent {
    int index = 0;
    double t = 0.0;
    double s = 0.0;      // normalized arc length in [0, 1)
    double alpha = 0.0;  // incidence angle, positive when the velocity runs along the ccw tangent
    double L_after = 0.0;
    bool corner = false;
    Vec2 position{};
};

struct PolarRhs {
    double dr = 0.0;
    double dp_r = 0.0;
    double dphi = 0.0;
};

struct IntegratorOptions {
    double dt = 0.0;            // 0: ballistic time / 1e4
    double apex_eps = 1e-9;     // relative to the contour scale
    double origin_eta = 0.01;   // near the polar origin h <= eta r / |v|
    double wall_tol = 1e-10;    // relative to the contour scale
    long max_steps = 20000000;  // per flight
    int record_every = 0;       // 0: no trajectory recording
};

// ---------------------------------------------------------------------------
// Kinematics

inline Vec2 position(const ClassicalState& s, const BilliardDomain& d) {
    return d.surface.center() + Vec2{s.r * std::cos(s.phi), s.r * std::sin(s.phi)};
}

inline double xi_at(const BilliardDomain& d, double r) {
    const double df = d.surface.jet(std::abs(r)).df;
    return 1.0 / (1.0 + df * df);
}

/// Canonical Cartesian momentum p_r e_r + (L / r) e_phi.
inline Vec2 cartesian_momentum(const ClassicalState& s) {
    const Vec2 er{std::cos(s.phi), std::sin(s.phi)}, ep{-std::sin(s.phi), std::cos(s.phi)};
    return er * s.p_r + ep * (s.L / s.r);
}

/// In-plane velocity xi p_r e_r + (L / r) e_phi.
inline Vec2 velocity(const ClassicalState& s, const BilliardDomain& d) {
    const Vec2 er{std::cos(s.phi), std::sin(s.phi)}, ep{-std::sin(s.phi), std::cos(s.phi)};
    return er * (xi_at(d, s.r) * s.p_r) + ep * (s.L / s.r);
}

inline ClassicalState state_from_cartesian(Vec2 pos, Vec2 p, double t, const BilliardDomain& d) {
    const Vec2 rel = pos - d.surface.center();
    ClassicalState s;
    s.r = rel.norm();
    if (s.r == 0.0) throw DomainError("state at the polar origin has no angular coordinate");
    s.phi = std::atan2(rel.y, rel.x);
    const Vec2 er = rel * (1.0 / s.r), ep{-er.y, er.x};
    s.p_r = p.dot(er);
    s.L = s.r * p.dot(ep);
    s.t = t;
    return s;
}

/// H = (1/2 mu) [xi p_r^2 + L^2 / r^2] - q E0 f(r).
inline double hamiltonian(const ClassicalState& s, const BilliardDomain& d) {
    const double r = std::abs(s.r);
    return (0.5 / mass) * (xi_at(d, r) * s.p_r * s.p_r + s.L * s.L / (r * r)) + d.potential(r);
}

inline double contour_scale(const BilliardDomain& d) { return d.contour.scale(); }

/// Which side of the cone base crease a step is evaluated on: the natural
/// profile (0), the flank continued past the base (+1), or the flat outer
/// region continued inward (-1). Locking a step to one side keeps the RK4
/// stages smooth; crossings are then located by bisection.
inline int crease_side(const ClassicalState& s, const BilliardDomain& d) {
    if (!d.surface.is_cone()) return 0;
    return std::abs(s.r) <= d.surface.cone_shape().base_radius ? 1 : -1;
}

/// Hamilton's equations in polar form. Negative r stands for the point
/// reflected through the origin (used only on L = 0 orbits through the center).
inline PolarRhs hamiltonian_rhs(const ClassicalState& s, const BilliardDomain& d, double apex_eps = 1e-9,
                                int side = 0) {
    const double ar = std::abs(s.r);
    if (d.surface.is_cone() && ar < apex_eps * contour_scale(d))
        throw DomainError("trajectory reached the cone apex (r = " + std::to_string(ar) + ")");
    RadialJet j;
    if (side == 0)
        j = d.surface.jet(ar);
    else if (side > 0)
        j.df = -d.surface.max_slope();
    const double df = s.r < 0.0 ? -j.df : j.df;
    const double xi = 1.0 / (1.0 + df * df);
    const double vr = xi * s.p_r / mass;
    PolarRhs out;
    out.dr = vr;
    out.dp_r = (mass * vr * vr * j.d2f + d.charge * d.field) * df;
    if (s.L != 0.0) {
        out.dp_r += s.L * s.L / (mass * s.r * s.r * s.r);
        out.dphi = s.L / (mass * s.r * s.r);
    }
    return out;
}

inline ClassicalState rk4_step(const ClassicalState& s, const BilliardDomain& d, double h, double apex_eps) {
    const int side = crease_side(s, d);
    auto shifted = [&](const PolarRhs& k, double c) {
        ClassicalState o = s;
        o.r += c * k.dr;
        o.p_r += c * k.dp_r;
        o.phi += c * k.dphi;
        return o;
    };
    const PolarRhs k1 = hamiltonian_rhs(s, d, apex_eps, side);
    const PolarRhs k2 = hamiltonian_rhs(shifted(k1, 0.5 * h), d, apex_eps, side);
    const PolarRhs k3 = hamiltonian_rhs(shifted(k2, 0.5 * h), d, apex_eps, side);
    const PolarRhs k4 = hamiltonian_rhs(shifted(k3, h), d, apex_eps, side);
    ClassicalState o = s;
    o.r += h / 6.0 * (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr);
    o.p_r += h / 6.0 * (k1.dp_r + 2.0 * k2.dp_r + 2.0 * k3.dp_r + k4.dp_r);
    o.phi += h / 6.0 * (k1.dphi + 2.0 * k2.dphi + 2.0 * k3.dphi + k4.dphi);
    o.t += h;
    if (o.r < 0.0) {
        o.r = -o.r;
        o.phi += pi;
        o.p_r = -o.p_r;
    }
    return o;
}

// ---------------------------------------------------------------------------
// Reflection

/// Reflects the canonical momentum about the wall normal n in the inverse
/// metric, p' = p - 2 (p.G^-1 n / n.G^-1 n) n with G = I + grad f grad f^T.
/// The normal velocity component flips and the kinetic energy is unchanged;
/// where grad f = 0 this is the plain mirror image.
inline Vec2 reflect_momentum(Vec2 p, Vec2 n, Vec2 grad) {
    const double g2 = grad.dot(grad);
    auto ginv = [&](Vec2 v) { return v - grad * (grad.dot(v) / (1.0 + g2)); };
    const double pn = p.dot(ginv(n));
    const double nn = n.dot(ginv(n));
    return p - n * (2.0 * pn / nn);
}

inline Vec2 surface_gradient(const BilliardDomain& d, Vec2 pos) {
    const Vec2 rel = pos - d.surface.center();
    const double r = rel.norm();
    if (r == 0.0) return {};
    return rel * d.surface.jet(r).df_over_r;
}

/// State after the wall collision described by `event`.
inline ClassicalState reflect(const CollisionEvent& event, const ClassicalState& incoming, const BilliardDomain& d) {
    const Vec2 pos = position(incoming, d);
    const BoundaryPoint bp = d.contour.locate(pos, 1e-9 * contour_scale(d));
    const Vec2 grad = surface_gradient(d, pos);
    Vec2 p = cartesian_momentum(incoming);
    p = reflect_momentum(p, bp.outward_normal, grad);
    if (bp.corner || event.corner) p = reflect_momentum(p, bp.second_normal, grad);
    ClassicalState out = state_from_cartesian(pos, p, incoming.t, d);
    return out;
}

// ---------------------------------------------------------------------------
// Flights

struct FlightResult {
    ClassicalState at_wall;   // state at the refined crossing, before reflection
    ClassicalState after;     // reflected state (equal to at_wall if no collision)
    CollisionEvent event;
    bool collided = false;
    long steps = 0;
    int crease_crossings = 0;
    std::vector<ClassicalState> trajectory;
};

inline double default_step(const ClassicalState& s, const BilliardDomain& d) {
    const double speed = std::max(velocity(s, d).norm(), 1e-300);
    return 1e-4 * contour_scale(d) / speed;
}

namespace detail {

inline CollisionEvent make_event(const ClassicalState& s, const BilliardDomain& d) {
    CollisionEvent ev;
    ev.t = s.t;
    ev.position = position(s, d);
    const BoundaryPoint bp = d.contour.locate(ev.position, 1e-9 * contour_scale(d));
    ev.s = bp.s;
    ev.corner = bp.corner;
    const Vec2 n = bp.outward_normal;
    const Vec2 tangent{-n.y, n.x};
    const Vec2 v = velocity(s, d);
    ev.alpha = std::atan2(tangent.dot(v), n.dot(v));
    return ev;
}

}  // namespace detail

/// Integrates from `start` until the next wall collision (or t_stop). The
/// crossing is refined by bisection on the RK4 step length; the cone base
/// crease, where xi jumps, is crossed with p_r sqrt(xi) conserved so that H
/// stays continuous.
inline FlightResult integrate_to_collision(const ClassicalState& start, const BilliardDomain& d,
                                           const IntegratorOptions& opt = {},
                                           double t_stop = std::numeric_limits<double>::infinity()) {
    FlightResult out;
    const double scale = contour_scale(d);
    const double wall_tol = opt.wall_tol * scale;
    const double dt = opt.dt > 0.0 ? opt.dt : default_step(start, d);
    const bool has_crease = d.surface.is_cone();
    const double crease = has_crease ? d.surface.cone_shape().base_radius : 0.0;
    const double xi_flank = has_crease ? 1.0 / (1.0 + square(d.surface.max_slope())) : 1.0;

    ClassicalState s = start;
    if (opt.record_every > 0) out.trajectory.push_back(s);
    auto inside = [&](const ClassicalState& x) { return d.contour.signed_distance(position(x, d)); };

    while (true) {
        if (++out.steps > opt.max_steps)
            throw ToleranceError("runaway trajectory: no wall collision after " + std::to_string(opt.max_steps) + " steps");
        double h = dt;
        if (s.L != 0.0) {
            const double speed = velocity(s, d).norm();
            h = std::min(h, opt.origin_eta * s.r / std::max(speed, 1e-300));
        }
        bool final_step = false;
        if (s.t + h >= t_stop) {
            h = t_stop - s.t;
            final_step = true;
        }
        if (h <= 0.0) break;
        ClassicalState next = rk4_step(s, d, h, opt.apex_eps);

        // wall crossing within this step
        double tau_wall = -1.0;
        ClassicalState wall_state;
        if (inside(next) < 0.0) {
            double lo = 0.0, hi = h;
            ClassicalState lo_state = s;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                const ClassicalState m = rk4_step(s, d, mid, opt.apex_eps);
                if (inside(m) >= 0.0) {
                    lo = mid;
                    lo_state = m;
                } else {
                    hi = mid;
                }
                if (inside(lo_state) < wall_tol && lo > 0.0) break;
                if (hi - lo <= 1e-15 * std::max(1.0, s.t)) break;
            }
            tau_wall = lo;
            wall_state = lo_state;
        }

        // crease crossing before the wall (or within the step)
        if (has_crease) {
            const double horizon = tau_wall >= 0.0 ? tau_wall : h;
            const ClassicalState end = tau_wall >= 0.0 ? wall_state : next;
            const bool start_in = s.r <= crease;
            const bool end_in = end.r <= crease;
            if (start_in != end_in && horizon > 0.0) {
                double lo = 0.0, hi = horizon;
                ClassicalState hi_state = end;
                for (int it = 0; it < 200; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const ClassicalState m = rk4_step(s, d, mid, opt.apex_eps);
                    if ((m.r <= crease) == start_in)
                        lo = mid;
                    else {
                        hi = mid;
                        hi_state = m;
                    }
                    if (std::abs(hi_state.r - crease) < 1e-13 * scale) break;
                    if (hi - lo <= 1e-16 * std::max(1.0, s.t)) break;
                }
                // hi_state sits just past the crease; rescale p_r to the new side
                const double xi_from = start_in ? xi_flank : 1.0;
                const double xi_to = start_in ? 1.0 : xi_flank;
                hi_state.p_r *= std::sqrt(xi_from / xi_to);
                s = hi_state;
                ++out.crease_crossings;
                if (opt.record_every > 0 && out.steps % opt.record_every == 0) out.trajectory.push_back(s);
                continue;
            }
        }

        if (tau_wall >= 0.0) {
            out.at_wall = wall_state;
            out.event = detail::make_event(wall_state, d);
            out.after = reflect(out.event, wall_state, d);
            out.event.L_after = out.after.L;
            out.collided = true;
            if (opt.record_every > 0) out.trajectory.push_back(wall_state);
            return out;
        }
        s = next;
        if (opt.record_every > 0 && out.steps % opt.record_every == 0) out.trajectory.push_back(s);
        if (final_step) break;
    }
    out.at_wall = s;
    out.after = s;
    if (opt.record_every > 0 && (out.trajectory.empty() || out.trajectory.back().t != s.t)) out.trajectory.push_back(s);
    return out;
}

struct CollisionRun {
    std::vector<CollisionEvent> events;
    ClassicalState final_state;
    double energy_start = 0.0;
    double max_relative_drift = 0.0;
    std::vector<ClassicalState> trajectory;
};

/// Follows `n` collisions, reflecting at each.
inline CollisionRun run_collisions(const ClassicalState& start, const BilliardDomain& d, int n,
                                   const IntegratorOptions& opt = {}) {
    CollisionRun run;
    run.energy_start = hamiltonian(start, d);
    ClassicalState s = start;
    IntegratorOptions o = opt;
    if (o.dt <= 0.0) o.dt = default_step(start, d);
    for (int i = 0; i < n; ++i) {
        FlightResult f = integrate_to_collision(s, d, o);
        if (!f.collided) throw ToleranceError("flight ended without a collision");
        f.event.index = i;
        run.events.push_back(f.event);
        if (o.record_every > 0) run.trajectory.insert(run.trajectory.end(), f.trajectory.begin(), f.trajectory.end());
        s = f.after;
        const double e = hamiltonian(s, d);
        run.max_relative_drift =
            std::max(run.max_relative_drift, std::abs(e - run.energy_start) / std::max(std::abs(run.energy_start), 1e-300));
    }
    run.final_state = s;
    return run;
}

/// Advances for a fixed time, reflecting at walls.
inline ClassicalState propagate(const ClassicalState& start, const BilliardDomain& d, double duration,
                                const IntegratorOptions& opt = {}) {
    IntegratorOptions o = opt;
    if (o.dt <= 0.0) o.dt = default_step(start, d);
    const double t_end = start.t + duration;
    ClassicalState s = start;
    while (s.t < t_end) {
        FlightResult f = integrate_to_collision(s, d, o, t_end);
        s = f.after;
        if (!f.collided) break;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Circular cone: closed forms

struct PolarPoint {
    double r = 0.0;
    double phi = 0.0;
};

/// Free flight on the cone flank from (r0, phi0) with dr/dt = v_r0 and
/// dphi/dt = omega0: a straight line in the unrolled cone. The angle comes
/// from atan2, whose second argument keeps one sign for t > 0, so phi(t) is
/// continuous without unwrapping.
inline PolarPoint cone_free_flight(double r0, double phi0, double v_r0, double omega0, double f0_over_r, double t) {
    if (!(r0 > 0.0)) throw DomainError("cone_free_flight requires r0 > 0");
    const double xi0 = 1.0 / (1.0 + f0_over_r * f0_over_r);
    const double a = r0 + v_r0 * t;
    const double b = r0 * omega0 * t;
    PolarPoint p;
    p.r = std::sqrt(a * a + xi0 * b * b);
    p.phi = phi0 + std::sqrt(1.0 + f0_over_r * f0_over_r) * std::atan2(std::sqrt(xi0) * b, a);
    return p;
}

struct ConeMapPoint {
    double phi = 0.0;
    double beta = 0.0;
};

/// One step of the circular cone billiard map.
inline ConeMapPoint cone_collision_map(double phi, double beta, double f0_over_r, int direction_eps) {
    if (direction_eps != 1 && direction_eps != -1) throw DomainError("direction must be +1 or -1");
    const double c = 2.0 * beta + direction_eps * pi * std::sqrt(1.0 + f0_over_r * f0_over_r);
    return {phi + c, beta};
}

struct ConeMapStart {
    double phi = 0.0;
    double beta = 0.0;
    int eps = 1;
    double delta_phi = 0.0;  // angle swept between collisions
};

/// Map coordinates of a post-collision state in a circular cone billiard
/// (apex at the circle center, base radius equal to the circle radius).
/// The swept angle follows from the chord in the unrolled cone; eps is -1 for
/// counter-clockwise motion and beta is reduced to [0, pi).
inline ConeMapStart cone_map_coordinates(const ClassicalState& s, const BilliardDomain& d) {
    if (!d.surface.is_cone() || !d.contour.is_circle()) throw DomainError("cone map needs a circular cone billiard");
    const double fr = d.surface.max_slope();
    const double xi0 = 1.0 / (1.0 + fr * fr);
    const double radius = d.contour.circle_shape().radius;
    const double energy = hamiltonian(s, d) - d.potential(s.r);
    const double ptilde = std::sqrt(2.0 * mass * energy);
    const double sin_theta = std::clamp(std::abs(s.L) / (radius * ptilde), 0.0, 1.0);
    const double theta = std::asin(sin_theta);
    const double sign = s.L >= 0.0 ? 1.0 : -1.0;
    ConeMapStart m;
    m.delta_phi = sign * (pi - 2.0 * theta) / std::sqrt(xi0);
    m.eps = s.L > 0.0 ? -1 : 1;
    m.phi = s.phi;
    double beta = 0.5 * (m.delta_phi - m.eps * pi / std::sqrt(xi0));
    beta = std::fmod(beta, pi);
    if (beta < 0.0) beta += pi;
    m.beta = beta;
    return m;
}

struct RescaledState {
    double r = 0.0;
    double phi = 0.0;
    double p_r = 0.0;
    double p_phi = 0.0;
};

/// (r, phi, p_r, p_phi) -> (r / sqrt(xi0), sqrt(xi0) phi, sqrt(xi0) p_r, p_phi / sqrt(xi0)).
inline RescaledState canonical_rescale(const ClassicalState& s, double f0_over_r) {
    const double sx = 1.0 / std::sqrt(1.0 + f0_over_r * f0_over_r);
    return {s.r / sx, sx * s.phi, sx * s.p_r, s.L / sx};
}

// ---------------------------------------------------------------------------
// Reduced phase space

struct PoincareEvent {
    int traj_id = 0;
    int collision_idx = 0;
    double s = 0.0;
    double alpha = 0.0;
};

struct PoincareResult {
    std::vector<PoincareEvent> events;  // ordered by trajectory, then collision
    std::vector<std::pair<int, std::string>> failures;
    double max_relative_drift = 0.0;
};

/// Random interior start with kinetic energy `energy - V`. Positions are
/// uniform in the contour's bounding box (rejection), directions uniform.
inline ClassicalState random_start(const BilliardDomain& d, CounterRng& rng, double energy) {
    const Vec2 lo = d.contour.lower_corner(), hi = d.contour.upper_corner();
    const double margin = 1e-3 * contour_scale(d);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const Vec2 pos{rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y)};
        if (d.contour.signed_distance(pos) < margin) continue;
        const double r = (pos - d.surface.center()).norm();
        if (r < margin) continue;
        const double kinetic = energy - d.potential(r);
        if (kinetic <= 0.0) continue;
        const double theta = rng.uniform(0.0, 2.0 * pi);
        Vec2 p{std::cos(theta), std::sin(theta)};
        ClassicalState s = state_from_cartesian(pos, p, 0.0, d);
        const double t0 = hamiltonian(s, d) - d.potential(r);
        const double scale = std::sqrt(kinetic / t0);
        s.p_r *= scale;
        s.L *= scale;
        return s;
    }
    throw DomainError("could not place a random initial condition in the domain");
}

/// Collision records of n_initial random trajectories. Trajectories run in
/// parallel, each on its own RNG sub-stream; failures are reported and skipped.
inline PoincareResult poincare_section(const BilliardDomain& d, int n_initial, int n_collisions, std::uint64_t seed,
                                       double energy = 0.5, const IntegratorOptions& opt = {}) {
    if (n_initial < 1) throw DomainError("poincare_section needs at least one initial condition");
    d.validate();
    std::vector<std::vector<PoincareEvent>> per(n_initial);
    std::vector<std::string> errors(n_initial);
    std::vector<double> drift(n_initial, 0.0);
    parallel_for(static_cast<std::size_t>(n_initial), [&](std::size_t k) {
        try {
            CounterRng rng(CounterRng::substream(seed, k));
            const ClassicalState s = random_start(d, rng, energy);
            const CollisionRun run = run_collisions(s, d, n_collisions, opt);
            for (const auto& ev : run.events)
                per[k].push_back({static_cast<int>(k), ev.index, ev.s, ev.alpha});
            drift[k] = run.max_relative_drift;
        } catch (const Error& e) {
            per[k].clear();
            errors[k] = e.what();
        }
    });
    PoincareResult out;
    for (int k = 0; k < n_initial; ++k) {
        if (!errors[k].empty()) {
            out.failures.emplace_back(k, errors[k]);
            continue;
        }
        out.events.insert(out.events.end(), per[k].begin(), per[k].end());
        out.max_relative_drift = std::max(out.max_relative_drift, drift[k]);
    }
    return out;
}

/// Fraction of (s, alpha) cells visited on [0,1) x [-pi/2, pi/2].
inline double cell_coverage(const std::vector<PoincareEvent>& events, int s_bins, int alpha_bins) {
    std::vector<char> hit(static_cast<std::size_t>(s_bins) * alpha_bins, 0);
    for (const auto& e : events) {
        const int i = std::clamp(static_cast<int>(e.s * s_bins), 0, s_bins - 1);
        const int j = std::clamp(static_cast<int>((e.alpha + 0.5 * pi) / pi * alpha_bins), 0, alpha_bins - 1);
        hit[static_cast<std::size_t>(i) * alpha_bins + j] = 1;
    }
    return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / hit.size();
}

}  // namespace nonplanar
