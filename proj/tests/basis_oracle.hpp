#pragma once

// Direct 2D quadrature of <u| term |v> on the rectangle, applying each term of
// the surface Hamiltonian to the sine state v in closed form. Shared by the
// unit tests and the acceptance run.

#include <cmath>

#include "nonplanar/basis.hpp"
#include "nonplanar/quadrature.hpp"

namespace oracle {

inline double basis_element(const nonplanar::BilliardDomain& d, const nonplanar::BasisIndex& ix, nonplanar::BasisTerm t,
                            int u, int v, double tol = 1e-10) {
    using namespace nonplanar;
    const BasisState& su = ix[u];
    const BasisState& sv = ix[v];
    const double nrm = 2.0 / std::sqrt(ix.area());
    const Vec2 c = d.surface.center();
    auto f = [&](double x, double y) {
        const double X = x - c.x, Y = y - c.y, r = std::hypot(X, Y);
        const double a = sv.kx, b = sv.ky;
        const double sx = std::sin(a * x), sy = std::sin(b * y), cx = std::cos(a * x), cy = std::cos(b * y);
        const double vv = nrm * sx * sy;
        const double uu = nrm * std::sin(su.kx * x) * std::sin(su.ky * y);
        const RadialJet j = d.surface.jet(r);
        const double xi = 1.0 / (1.0 + j.df * j.df);
        const double kr = j.d2f * xi * std::sqrt(xi);
        const double kp = j.df_over_r * std::sqrt(xi);
        double val = 0.0;
        switch (t) {
        case BasisTerm::xi_h0: val = xi * sv.eps * vv; break;
        case BasisTerm::confining_kr: val = -kr * kr / 8 * vv; break;
        case BasisTerm::confining_kphi: val = -kp * kp / 8 * vv; break;
        case BasisTerm::confining_cross: val = kr * kp / 4 * vv; break;
        case BasisTerm::radial_kinetic: {
            // (1/2) kappa d_r v with kappa = xi^2 f' f''
            const double kappa = xi * xi * j.df * j.d2f;
            const double r_dr = nrm * (X * a * cx * sy + Y * b * sx * cy);
            val = r > 0 ? 0.5 * kappa * r_dr / r : 0.0;
            break;
        }
        case BasisTerm::centrifugal: {
            // zeta L^2 v / (2 r^2), L^2 = -(X d_y - Y d_x)^2
            const double zeta = 1.0 - xi;
            const double l2 = nrm * ((X * X * b * b + Y * Y * a * a) * sx * sy + X * a * cx * sy + Y * b * sx * cy +
                                     2 * X * Y * a * b * cx * cy);
            val = r > 0 ? zeta / (2 * r * r) * l2 : 0.0;
            break;
        }
        case BasisTerm::electric: val = d.potential(r) * vv; break;
        }
        return uu * val;
    };
    const auto& rc = d.contour.rectangle_shape();
    return quad::adaptive_2d(f, 0.0, rc.lx, [](double) { return 0.0; }, [&](double) { return rc.ly; }, tol, 8).value;
}

}  // namespace oracle
