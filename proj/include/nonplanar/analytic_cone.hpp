#pragma once

// Exact spectrum of the circular cone billiard. After the canonical rescaling
// r -> r / sqrt(xi0) the radial problem is Bessel's equation of order m_Sigma
// on a disk of radius R / sqrt(xi0).

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "nonplanar/bessel.hpp"
#include "nonplanar/core.hpp"
#include "nonplanar/eigensolver.hpp"
#include "nonplanar/spectra.hpp"

namespace nonplanar {

struct ConeMode {
    int m = 0;
    int s = 0;
    double order = 0.0;  // m_Sigma; NaN for channels solved on the radial grid
    double zero = 0.0;   // beta_{m_Sigma, s}
    double energy = 0.0;
    bool numeric = false;  // true for the finite-difference m = 0 channel
};

struct ConeOptions {
    double radius = 1.0;
    ConfiningForm form = ConfiningForm::derived;
    bool include_m0 = true;
    int points_per_wavelength = 400;  // radial grid for an imaginary-order m = 0 channel
    double core_fraction = 1e-2;      // hard-core radius of that channel, relative to R / sqrt(xi0)
};

struct ConeSpectrum {
    std::vector<ConeMode> modes;  // ascending energy, +m and -m listed separately
    Spectrum spectrum;
    std::vector<std::string> flagged;  // channels with m_Sigma^2 < 0 and how they were handled
    double xi0 = 1.0;
};

inline double cone_xi0(double f0_over_r) { return 1.0 / (1.0 + f0_over_r * f0_over_r); }

/// m_Sigma^2 = m^2 / xi0 - (L_Sigma / hbar)^2 in rescaled units. The derived
/// confining term contributes F^2 / 4; the printed form carries one more xi0.
inline double cone_order_squared(int m, double f0_over_r, ConfiningForm form) {
    const double xi0 = cone_xi0(f0_over_r);
    const double f2 = f0_over_r * f0_over_r;
    const double l2 = form == ConfiningForm::derived ? f2 / 4.0 : f2 * xi0 / 4.0;
    return m * m / xi0 - l2;
}

inline double cone_energy(double zero, double f0_over_r, double radius = 1.0) {
    return kinetic_prefactor * zero * zero * cone_xi0(f0_over_r) / (radius * radius);
}

/// Eigenvalues of -(1/2)[(1/r)(r u')' - nu2 u / r^2] on (core, rmax) with
/// u = 0 at both ends. For nu2 < 0 the operator on (0, rmax) is unbounded
/// below (the attractive 1/r^2 tail exceeds the Hardy bound), so a small hard
/// core replaces the apex. Flux form, symmetrized by the weights r_i. Levels
/// at or below e_cut, Richardson-extrapolated from grids with h and h/2.
inline std::vector<double> radial_channel_levels(double nu2, double core, double rmax, double e_cut, int n) {
    if (!(core > 0.0 && core < rmax)) throw DomainError("radial channel needs 0 < core < rmax");
    auto solve = [&](int cells) {
        const double h = (rmax - core) / (cells + 1);
        std::vector<double> d(cells), e(cells, 0.0);
        for (int i = 0; i < cells; ++i) {
            const double r = core + (i + 1) * h;
            const double rm = r - 0.5 * h, rp = r + 0.5 * h;
            d[i] = kinetic_prefactor * ((rm + rp) / (r * h * h) + nu2 / (r * r));
            if (i + 1 < cells) e[i] = -kinetic_prefactor * rp / (h * h * std::sqrt(r * (r + h)));
        }
        tridiagonal_ql(d, e);
        return d;
    };
    const std::vector<double> coarse = solve(n);
    const std::vector<double> fine = solve(2 * n + 1);
    std::vector<double> out;
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        const double ex = (4.0 * fine[i] - coarse[i]) / 3.0;
        if (ex > e_cut) break;
        out.push_back(ex);
    }
    return out;
}

namespace detail {

inline ConeSpectrum finish_cone(std::vector<ConeMode> modes, double xi0, std::vector<std::string> flagged) {
    std::stable_sort(modes.begin(), modes.end(), [](const ConeMode& a, const ConeMode& b) {
        if (a.energy != b.energy) return a.energy < b.energy;
        if (std::abs(a.m) != std::abs(b.m)) return std::abs(a.m) < std::abs(b.m);
        if (a.s != b.s) return a.s < b.s;
        return a.m > b.m;
    });
    ConeSpectrum out;
    out.xi0 = xi0;
    out.flagged = std::move(flagged);
    std::vector<double> levels;
    std::vector<std::string> tags;
    for (const auto& md : modes) {
        levels.push_back(md.energy);
        tags.push_back("m=" + std::to_string(md.m) + ";s=" + std::to_string(md.s) + (md.numeric ? ";radial_fd" : ";bessel"));
    }
    out.spectrum = make_spectrum(std::move(levels), "analytic", std::move(tags));
    out.modes = std::move(modes);
    return out;
}

// One channel |m|: levels at or below e_cut, or the first s_max if e_cut is infinite.
inline std::vector<ConeMode> cone_channel(int m, double f0_over_r, const ConeOptions& opt, double e_cut, int s_max,
                                          std::vector<std::string>& flagged) {
    std::vector<ConeMode> out;
    const double xi0 = cone_xi0(f0_over_r);
    const double nu2 = cone_order_squared(m, f0_over_r, opt.form);
    if (nu2 < 0.0) {
        std::string note = "m=" + std::to_string(m) + " order^2=" + std::to_string(nu2);
        if (!opt.include_m0 || m != 0) {
            flagged.push_back(note + " excluded");
            return out;
        }
        flagged.push_back(note + " solved on radial grid");
        const double rmax = opt.radius / std::sqrt(xi0);
        double cut = e_cut;
        if (!std::isfinite(cut)) {
            // enough range for s_max levels: zeros are roughly pi apart
            const double kmax = (s_max + 2.0) * pi / rmax;
            cut = kinetic_prefactor * kmax * kmax;
        }
        const double kmax = std::sqrt(cut / kinetic_prefactor);
        const double core = opt.core_fraction * rmax;
        // resolve both the wavelength and the core scale (h <= core / 10)
        const int n = std::max({200, static_cast<int>(std::ceil(opt.points_per_wavelength * kmax * rmax / (2.0 * pi))),
                                static_cast<int>(std::ceil(10.0 * rmax / core))});
        const std::vector<double> lv = radial_channel_levels(nu2, core, rmax, cut, n);
        for (std::size_t i = 0; i < lv.size() && static_cast<int>(i) < s_max; ++i) {
            ConeMode md;
            md.m = 0;
            md.s = static_cast<int>(i) + 1;
            md.order = std::numeric_limits<double>::quiet_NaN();
            md.energy = lv[i];
            md.zero = opt.radius * std::sqrt(lv[i] / (kinetic_prefactor * xi0));
            md.numeric = true;
            out.push_back(md);
        }
        return out;
    }
    const double nu = std::sqrt(nu2);
    const double x_max = std::isfinite(e_cut) ? opt.radius * std::sqrt(e_cut / (kinetic_prefactor * xi0))
                                              : std::numeric_limits<double>::infinity();
    const std::vector<double> zeros = bessel_zeros(nu, s_max, x_max);
    for (std::size_t i = 0; i < zeros.size(); ++i) {
        ConeMode md;
        md.m = m;
        md.s = static_cast<int>(i) + 1;
        md.order = nu;
        md.zero = zeros[i];
        md.energy = cone_energy(zeros[i], f0_over_r, opt.radius);
        out.push_back(md);
        if (m != 0) {
            md.m = -m;
            out.push_back(md);
        }
    }
    return out;
}

inline ConeSpectrum run_channels(int m_max, double f0_over_r, const ConeOptions& opt, double e_cut, int s_max) {
    if (!(f0_over_r >= 0.0)) throw DomainError("cone requires f0/R >= 0");
    if (!(opt.radius > 0.0)) throw DomainError("cone radius must be positive");
    std::vector<std::vector<ConeMode>> per(m_max + 1);
    std::vector<std::vector<std::string>> notes(m_max + 1);
    parallel_for(static_cast<std::size_t>(m_max + 1), [&](std::size_t m) {
        per[m] = cone_channel(static_cast<int>(m), f0_over_r, opt, e_cut, s_max, notes[m]);
    });
    std::vector<ConeMode> modes;
    std::vector<std::string> flagged;
    for (int m = 0; m <= m_max; ++m) {
        modes.insert(modes.end(), per[m].begin(), per[m].end());
        flagged.insert(flagged.end(), notes[m].begin(), notes[m].end());
    }
    return finish_cone(std::move(modes), cone_xi0(f0_over_r), std::move(flagged));
}

}  // namespace detail

/// Modes with 0 <= |m| <= m_max and 1 <= s <= s_max.
inline ConeSpectrum cone_spectrum(double f0_over_r, int m_max, int s_max, const ConeOptions& opt = {}) {
    if (m_max < 0 || s_max < 1) throw DomainError("cone_spectrum requires m_max >= 0 and s_max >= 1");
    return detail::run_channels(m_max, f0_over_r, opt, std::numeric_limits<double>::infinity(), s_max);
}

/// Every level at or below e_cut. Channels are cut off with j_{nu,1} > nu, so
/// no level below e_cut is missed.
inline ConeSpectrum cone_spectrum_below(double f0_over_r, double e_cut, const ConeOptions& opt = {}) {
    if (!(e_cut > 0.0)) throw DomainError("cone_spectrum_below requires e_cut > 0");
    const double xi0 = cone_xi0(f0_over_r);
    const double x_max = opt.radius * std::sqrt(e_cut / (kinetic_prefactor * xi0));
    int m_max = 0;
    while (true) {
        const double nu2 = cone_order_squared(m_max + 1, f0_over_r, opt.form);
        if (nu2 > 0.0 && std::sqrt(nu2) > x_max) break;
        ++m_max;
    }
    return detail::run_channels(m_max, f0_over_r, opt, e_cut, std::numeric_limits<int>::max());
}

inline double cone_surface_area(double f0, double radius) { return pi * radius * std::sqrt(radius * radius + f0 * f0); }

/// The lowest `count` levels (complete: the cut is raised until it holds them).
inline ConeSpectrum cone_lowest_levels(double f0_over_r, int count, const ConeOptions& opt = {}) {
    if (count < 1) throw DomainError("cone_lowest_levels requires count >= 1");
    const double area = cone_surface_area(f0_over_r * opt.radius, opt.radius);
    double e_cut = 1.25 * count * 4.0 * pi / (2.0 * mass / (hbar * hbar) * area) + 10.0;
    for (int attempt = 0; attempt < 40; ++attempt) {
        ConeSpectrum cs = cone_spectrum_below(f0_over_r, e_cut, opt);
        if (static_cast<int>(cs.modes.size()) >= count) {
            cs.modes.resize(count);
            cs.spectrum.levels.resize(count);
            cs.spectrum.provenance.resize(count);
            cs.spectrum.n_use = count;
            return cs;
        }
        e_cut *= 1.3;
    }
    throw ToleranceError("cone_lowest_levels could not bracket " + std::to_string(count) + " levels");
}

}  // namespace nonplanar
