#pragma once

// Radially symmetric surfaces z = f(|p - center|) over planar billiard
// contours: metric, curvatures, and the coefficient fields that enter the
// surface kinetic energy and the geometric confining potential.

#include <cmath>
#include <limits>
#include <string>
#include <variant>

#include "nonplanar/core.hpp"
#include "nonplanar/quadrature.hpp"

namespace nonplanar {

struct FlatShape {};

/// f(r) = f0 (1 - r/R) on the flank, 0 beyond the base.
struct ConeShape {
    double f0 = 0.0;
    double base_radius = 1.0;
};

/// f(r) = V0 / (2 pi sigma^2) exp(-r^2 / (2 sigma^2)).
struct GaussianShape {
    double volume = 1.0;
    double sigma = 1.0;
};

/// Value and first two radial derivatives of f at one radius.
struct RadialJet {
    double f = 0.0;
    double df = 0.0;
    double d2f = 0.0;
    double df_over_r = 0.0;  // f'/r, with the analytic limit at r = 0 where it exists
};

class SurfaceProfile {
public:
    using Shape = std::variant<FlatShape, ConeShape, GaussianShape>;

    SurfaceProfile() = default;

    static SurfaceProfile flat(Vec2 center = {}) { return SurfaceProfile(FlatShape{}, center); }

    static SurfaceProfile cone(double f0, double base_radius, Vec2 center = {}) {
        if (!(f0 >= 0.0) || !(base_radius > 0.0))
            throw DomainError("cone requires f0 >= 0 and base radius > 0");
        return SurfaceProfile(ConeShape{f0, base_radius}, center);
    }

    static SurfaceProfile gaussian(double volume, double sigma, Vec2 center = {}) {
        if (!(volume > 0.0) || !(sigma > 0.0)) throw DomainError("gaussian bump requires V0 > 0 and sigma > 0");
        return SurfaceProfile(GaussianShape{volume, sigma}, center);
    }

    const Shape& shape() const { return shape_; }
    Vec2 center() const { return center_; }
    bool is_flat() const { return std::holds_alternative<FlatShape>(shape_); }
    bool is_cone() const { return std::holds_alternative<ConeShape>(shape_); }
    bool is_gaussian() const { return std::holds_alternative<GaussianShape>(shape_); }
    const ConeShape& cone_shape() const { return std::get<ConeShape>(shape_); }
    const GaussianShape& gaussian_shape() const { return std::get<GaussianShape>(shape_); }

    std::string kind_name() const {
        if (is_flat()) return "flat";
        if (is_cone()) return "cone";
        return "gaussian";
    }

    /// Radial jet at r >= 0. The cone apex (r = 0) is singular and throws.
    RadialJet jet(double r) const {
        if (r < 0.0) throw DomainError("negative radius");
        return std::visit(
            [r](const auto& s) -> RadialJet {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, FlatShape>) {
                    return {};
                } else if constexpr (std::is_same_v<S, ConeShape>) {
                    if (r <= 0.0) throw DomainError("cone apex (r = 0) is a singular point");
                    if (r > s.base_radius) return {};
                    const double slope = -s.f0 / s.base_radius;
                    return {s.f0 * (1.0 - r / s.base_radius), slope, 0.0, slope / r};
                } else {
                    const double s2 = s.sigma * s.sigma;
                    const double f = s.volume / (2.0 * pi * s2) * std::exp(-r * r / (2.0 * s2));
                    return {f, -r / s2 * f, (r * r / s2 - 1.0) * f / s2, -f / s2};
                }
            },
            shape_);
    }

    double height(double r) const {
        if (is_cone() && r <= 0.0) return cone_shape().f0;
        return jet(r).f;
    }

    double radius_of(Vec2 p) const { return (p - center_).norm(); }
    double height_at(Vec2 p) const { return height(radius_of(p)); }

    /// Planar gradient of f at p.
    Vec2 gradient_at(Vec2 p) const {
        const Vec2 d = p - center_;
        const double r = d.norm();
        if (r == 0.0) {
            if (is_cone()) throw DomainError("cone apex (r = 0) is a singular point");
            return {};
        }
        return d * jet(r).df_over_r;
    }

    /// Slope bound max |f'| used for the geometric-series convergence check.
    double max_slope() const {
        if (is_cone()) return cone_shape().f0 / cone_shape().base_radius;
        if (is_gaussian()) {
            const auto& g = gaussian_shape();
            return g.volume / (2.0 * pi * g.sigma * g.sigma * g.sigma) * std::exp(-0.5);
        }
        return 0.0;
    }

private:
    SurfaceProfile(Shape s, Vec2 c) : shape_(s), center_(c) {}

    Shape shape_ = FlatShape{};
    Vec2 center_{};
};

struct MetricData {
    double a11 = 1.0;     // 1 + f'^2
    double a22 = 0.0;     // r^2
    double sqrt_a = 0.0;  // r sqrt(a11)
};

struct PrincipalCurvatures {
    double k_r = 0.0;
    double k_phi = 0.0;
};

struct CoefficientFields {
    double xi = 1.0;
    double kappa = 0.0;
    double zeta = 0.0;
    double u_sigma = 0.0;
};

inline MetricData metric(const SurfaceProfile& profile, double r) {
    const RadialJet j = profile.jet(r);
    const double a11 = 1.0 + j.df * j.df;
    return {a11, r * r, r * std::sqrt(a11)};
}

/// K = f' f'' / (r (1 + f'^2)^2); the Gaussian bump has the finite limit
/// f''(0)^2 at its peak, the cone apex throws.
inline double gaussian_curvature(const SurfaceProfile& profile, double r) {
    const RadialJet j = profile.jet(r);
    const double w = 1.0 + j.df * j.df;
    return j.df_over_r * j.d2f / (w * w);
}

inline PrincipalCurvatures principal_curvatures(const SurfaceProfile& profile, double r) {
    const RadialJet j = profile.jet(r);
    const double xi = 1.0 / (1.0 + j.df * j.df);
    return {j.d2f * xi * std::sqrt(xi), j.df_over_r * std::sqrt(xi)};
}

/// Geometric confining potential -(hbar^2 / 8 mu)(k_r - k_phi)^2. The `printed`
/// form differs only on the cone flank, where it carries one more factor xi.
inline double confining_potential(const SurfaceProfile& profile, double r, ConfiningForm form) {
    const PrincipalCurvatures k = principal_curvatures(profile, r);
    double u = -(hbar * hbar / (8.0 * mass)) * square(k.k_r - k.k_phi);
    if (form == ConfiningForm::printed && profile.is_cone()) {
        const double df = profile.jet(r).df;
        u /= 1.0 + df * df;
    }
    return u;
}

inline CoefficientFields coefficient_fields(const SurfaceProfile& profile, double r,
                                            ConfiningForm form = ConfiningForm::derived) {
    const RadialJet j = profile.jet(r);
    CoefficientFields c;
    c.xi = 1.0 / (1.0 + j.df * j.df);
    c.kappa = c.xi * c.xi * j.df * j.d2f;
    c.zeta = 1.0 - c.xi;
    c.u_sigma = confining_potential(profile, r, form);
    return c;
}

// ---------------------------------------------------------------------------
// Contours

struct CircleContour {
    double radius = 1.0;
    Vec2 center{};
};

/// Axis-aligned box [0, lx] x [0, ly].
struct RectangleContour {
    double lx = 1.0;
    double ly = 1.0;
};

/// Boundary point data: arc-length coordinate and outward unit normal.
struct BoundaryPoint {
    double s = 0.0;  // normalized arc length in [0, 1)
    Vec2 outward_normal{};
    bool corner = false;
    Vec2 second_normal{};  // second wall normal at a corner
};

class Contour {
public:
    using Shape = std::variant<CircleContour, RectangleContour>;

    Contour() = default;

    static Contour circle(double radius, Vec2 center = {}) {
        if (!(radius > 0.0)) throw DomainError("circle radius must be positive");
        return Contour(CircleContour{radius, center});
    }
    static Contour rectangle(double lx, double ly) {
        if (!(lx > 0.0) || !(ly > 0.0)) throw DomainError("rectangle sides must be positive");
        return Contour(RectangleContour{lx, ly});
    }

    bool is_circle() const { return std::holds_alternative<CircleContour>(shape_); }
    bool is_rectangle() const { return std::holds_alternative<RectangleContour>(shape_); }
    const CircleContour& circle_shape() const { return std::get<CircleContour>(shape_); }
    const RectangleContour& rectangle_shape() const { return std::get<RectangleContour>(shape_); }
    std::string kind_name() const { return is_circle() ? "circle" : "rectangle"; }

    /// Positive inside, zero on the wall, negative outside.
    double signed_distance(Vec2 p) const {
        if (is_circle()) {
            const auto& c = circle_shape();
            return c.radius - (p - c.center).norm();
        }
        const auto& b = rectangle_shape();
        return std::min(std::min(p.x, b.lx - p.x), std::min(p.y, b.ly - p.y));
    }

    bool contains(Vec2 p) const { return signed_distance(p) > 0.0; }

    double perimeter() const {
        if (is_circle()) return 2.0 * pi * circle_shape().radius;
        const auto& b = rectangle_shape();
        return 2.0 * (b.lx + b.ly);
    }

    double planar_area() const {
        if (is_circle()) return pi * square(circle_shape().radius);
        const auto& b = rectangle_shape();
        return b.lx * b.ly;
    }

    /// Characteristic length (radius or shorter side).
    double scale() const {
        if (is_circle()) return circle_shape().radius;
        const auto& b = rectangle_shape();
        return std::min(b.lx, b.ly);
    }

    Vec2 lower_corner() const {
        if (is_circle()) {
            const auto& c = circle_shape();
            return {c.center.x - c.radius, c.center.y - c.radius};
        }
        return {0.0, 0.0};
    }
    Vec2 upper_corner() const {
        if (is_circle()) {
            const auto& c = circle_shape();
            return {c.center.x + c.radius, c.center.y + c.radius};
        }
        const auto& b = rectangle_shape();
        return {b.lx, b.ly};
    }

    /// Locates a point on (or within round-off of) the wall. For circles s is
    /// the polar angle about the circle center divided by 2 pi; rectangles are
    /// walked counter-clockwise from the origin corner.
    BoundaryPoint locate(Vec2 p, double corner_eps = 0.0) const {
        BoundaryPoint bp;
        if (is_circle()) {
            const auto& c = circle_shape();
            const Vec2 d = p - c.center;
            double phi = std::atan2(d.y, d.x);
            if (phi < 0.0) phi += 2.0 * pi;
            bp.s = phi / (2.0 * pi);
            if (bp.s >= 1.0) bp.s = 0.0;
            bp.outward_normal = d * (1.0 / d.norm());
            return bp;
        }
        const auto& b = rectangle_shape();
        const double per = perimeter();
        const double dl = p.x, dr = b.lx - p.x, db = p.y, dt = b.ly - p.y;
        const double m = std::min(std::min(dl, dr), std::min(db, dt));
        if (m == db) {
            bp.s = std::clamp(p.x, 0.0, b.lx) / per;
            bp.outward_normal = {0.0, -1.0};
        } else if (m == dr) {
            bp.s = (b.lx + std::clamp(p.y, 0.0, b.ly)) / per;
            bp.outward_normal = {1.0, 0.0};
        } else if (m == dt) {
            bp.s = (b.lx + b.ly + (b.lx - std::clamp(p.x, 0.0, b.lx))) / per;
            bp.outward_normal = {0.0, 1.0};
        } else {
            bp.s = (2.0 * b.lx + b.ly + (b.ly - std::clamp(p.y, 0.0, b.ly))) / per;
            bp.outward_normal = {-1.0, 0.0};
        }
        if (bp.s >= 1.0) bp.s -= 1.0;
        if (corner_eps > 0.0) {
            const bool near_x = std::min(dl, dr) < corner_eps;
            const bool near_y = std::min(db, dt) < corner_eps;
            if (near_x && near_y) {
                bp.corner = true;
                bp.outward_normal = {dl < dr ? -1.0 : 1.0, 0.0};
                bp.second_normal = {0.0, db < dt ? -1.0 : 1.0};
            }
        }
        return bp;
    }

private:
    explicit Contour(Shape s) : shape_(s) {}
    Shape shape_ = RectangleContour{};
};

/// Area of the surface patch over the billiard region,
/// integral of sqrt(1 + |grad f|^2) dx dy.
inline double surface_area(const SurfaceProfile& profile, const Contour& contour, double tol_rel = 1e-10) {
    auto density = [&](Vec2 p) {
        const double r = profile.radius_of(p);
        if (profile.is_cone() && r == 0.0) return std::sqrt(1.0 + square(profile.max_slope()));
        const double df = profile.jet(r).df;
        return std::sqrt(1.0 + df * df);
    };
    const double scale = contour.planar_area();
    const double tol = tol_rel * scale;
    // Break panels at the cone base where the slope jumps.
    const int panels = profile.is_cone() ? 8 : 2;
    if (contour.is_circle()) {
        const auto& c = contour.circle_shape();
        auto f = [&](double theta, double rho) {
            const Vec2 p = c.center + Vec2{rho * std::cos(theta), rho * std::sin(theta)};
            return density(p) * rho;
        };
        return quad::adaptive_2d(f, 0.0, 2.0 * pi, [](double) { return 0.0; },
                                 [&](double) { return c.radius; }, tol, panels)
            .value;
    }
    const auto& b = contour.rectangle_shape();
    auto f = [&](double x, double y) { return density({x, y}); };
    return quad::adaptive_2d(f, 0.0, b.lx, [](double) { return 0.0; }, [&](double) { return b.ly; }, tol, panels)
        .value;
}

}  // namespace nonplanar
