#pragma once

// Hamiltonian of a rectangular billiard with a Gaussian bump, expanded in the
// eigenbasis of the planar rectangle. Every term is a geometric series in
// f'^2 whose coefficients are products of one-dimensional integrals
//   I^{ss}_q(alpha) = int_0^L x^q e^{-alpha x^2} sin(k_u x) sin(k_v x) dx
//   I^{sc}_q(alpha) = int_0^L x^q e^{-alpha x^2} sin(k_u x) cos(k_v x) dx
// with x measured from the bump center.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "nonplanar/classical.hpp"
#include "nonplanar/core.hpp"
#include "nonplanar/eigensolver.hpp"
#include "nonplanar/fdm.hpp"
#include "nonplanar/geometry.hpp"
#include "nonplanar/quadrature.hpp"
#include "nonplanar/spectra.hpp"

namespace nonplanar {

struct BasisState {
    int m = 1;
    int n = 1;
    double kx = 0.0;
    double ky = 0.0;
    double eps = 0.0;
};

/// Planar rectangle modes ordered by energy, ties broken by (m, n).
class BasisIndex {
public:
    BasisIndex() = default;

    BasisIndex(double lx, double ly, int count) : lx_(lx), ly_(ly) {
        if (!(lx > 0.0 && ly > 0.0)) throw DomainError("basis rectangle needs positive sides");
        if (count < 1) throw DomainError("basis size must be >= 1");
        const double area = lx * ly;
        double k2 = 4.0 * pi * count / area * 1.5 + square(pi / lx) + square(pi / ly);
        std::vector<BasisState> all;
        while (true) {
            all.clear();
            const int mmax = static_cast<int>(std::sqrt(k2) * lx / pi) + 1;
            for (int m = 1; m <= mmax; ++m) {
                const double rest = k2 - square(m * pi / lx);
                if (rest < 0.0) break;
                const int nmax = static_cast<int>(std::sqrt(rest) * ly / pi);
                for (int n = 1; n <= nmax; ++n) all.push_back(make_state(m, n));
            }
            if (static_cast<int>(all.size()) >= count) break;
            k2 *= 1.5;
        }
        std::sort(all.begin(), all.end(), [](const BasisState& a, const BasisState& b) {
            if (a.eps != b.eps) return a.eps < b.eps;
            return std::tie(a.m, a.n) < std::tie(b.m, b.n);
        });
        all.resize(count);
        states_ = std::move(all);
        for (std::size_t u = 0; u < states_.size(); ++u) lookup_[{states_[u].m, states_[u].n}] = static_cast<int>(u);
    }

    int size() const { return static_cast<int>(states_.size()); }
    const BasisState& operator[](int u) const { return states_[u]; }
    const std::vector<BasisState>& states() const { return states_; }
    double lx() const { return lx_; }
    double ly() const { return ly_; }
    double area() const { return lx_ * ly_; }

    /// Linear index of mode (m, n), or -1 when it is not in the basis.
    int find(int m, int n) const {
        const auto it = lookup_.find({m, n});
        return it == lookup_.end() ? -1 : it->second;
    }

    int max_m() const {
        int out = 0;
        for (const auto& s : states_) out = std::max(out, s.m);
        return out;
    }
    int max_n() const {
        int out = 0;
        for (const auto& s : states_) out = std::max(out, s.n);
        return out;
    }

    /// <x, y | u> = (2 / sqrt(A)) sin(kx x) sin(ky y)
    double value(int u, double x, double y) const {
        const auto& s = states_[u];
        return 2.0 / std::sqrt(area()) * std::sin(s.kx * x) * std::sin(s.ky * y);
    }

private:
    BasisState make_state(int m, int n) const {
        BasisState s;
        s.m = m;
        s.n = n;
        s.kx = m * pi / lx_;
        s.ky = n * pi / ly_;
        s.eps = kinetic_prefactor * (s.kx * s.kx + s.ky * s.ky);
        return s;
    }

    double lx_ = 1.0;
    double ly_ = 1.0;
    std::vector<BasisState> states_;
    std::map<std::pair<int, int>, int> lookup_;
};

enum class TrigFamily { ss, sc };

inline const char* to_string(TrigFamily f) { return f == TrigFamily::ss ? "ss" : "sc"; }

/// Smallest sigma for which sup f'^2 < 1, so that 1 / (1 + f'^2) has a
/// convergent geometric expansion everywhere.
inline double sigma_min(double volume) { return std::cbrt(volume / (2.0 * pi * std::sqrt(std::exp(1.0)))); }

/// sup f'^2 = B sigma^2 / e, the ratio of the series in f'^2 (must be < 1).
inline double gaussian_series_ratio(double volume, double sigma) {
    return square(volume / (2.0 * pi * square(sigma) * sigma)) / std::exp(1.0);
}

/// The one-dimensional integrals, both on demand (adaptive, cached) and as
/// dense tables over integer wavenumber sums for assembly.
///
/// Tables use sin(a x) sin(b x) = [cos((a-b)x) - cos((a+b)x)] / 2 and
/// sin(a x) cos(b x) = [sin((a+b)x) + sin((a-b)x)] / 2, so for each axis,
/// alpha and q only the cosine and sine transforms at j pi / L are stored.
class IntegralTable {
public:
    IntegralTable() = default;

    IntegralTable(double lx, double ly, Vec2 center) : length_{lx, ly}, center_{center.x, center.y} {}

    double length(int axis) const { return length_[axis]; }
    double center(int axis) const { return center_[axis]; }

    /// int_0^L (x - c)^q e^{-alpha (x - c)^2} sin(ku x) trig(kv x) dx by
    /// adaptive Gauss-Legendre to tol_abs (default 1e-12). Cached.
    double integral(TrigFamily fam, int axis, int q, double alpha, double ku, double kv,
                    double tol_abs = 1e-12) const {
        if (axis != 0 && axis != 1) throw DomainError("axis must be 0 (x) or 1 (y)");
        if (q < 0) throw DomainError("integral power q must be >= 0");
        if (!(alpha >= 0.0)) throw DomainError("integral requires alpha >= 0");
        const Key key{static_cast<int>(fam), axis, q, alpha, ku, kv};
        {
            std::shared_lock lock(mutex_);
            const auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        const double L = length_[axis];
        const double c = center_[axis];
        auto f = [&](double x) {
            const double d = x - c;
            const double w = std::pow(d, q) * std::exp(-alpha * d * d);
            const double t = fam == TrigFamily::ss ? std::sin(kv * x) : std::cos(kv * x);
            return w * std::sin(ku * x) * t;
        };
        const double cycles = (std::abs(ku) + std::abs(kv)) * L / (2.0 * pi);
        const int panels = std::max(8, static_cast<int>(std::ceil(2.0 * cycles)));
        const double value = quad::adaptive(f, 0.0, L, tol_abs, panels).value;
        std::unique_lock lock(mutex_);
        cache_.emplace(key, value);
        return value;
    }

    std::size_t cached() const {
        std::shared_lock lock(mutex_);
        return cache_.size();
    }

    /// Fill tables for `alphas` (slot s) with q = 0..qmax[s] and j = 0..jmax[axis].
    void tabulate(const std::vector<double>& alphas, const std::vector<int>& qmax, int jmax_x, int jmax_y) {
        alphas_ = alphas;
        qmax_ = qmax;
        for (int axis = 0; axis < 2; ++axis) build_axis(axis, axis == 0 ? jmax_x : jmax_y);
    }

    bool tabulated() const { return !alphas_.empty(); }
    double alpha(int slot) const { return alphas_[slot]; }
    int qmax(int slot) const { return qmax_[slot]; }

    /// I^{ss}_q for wavenumbers mu pi / L and mv pi / L, from the tables.
    double ss(int axis, int slot, int q, int mu, int mv) const {
        return 0.5 * (jc(axis, slot, q, std::abs(mu - mv)) - jc(axis, slot, q, mu + mv));
    }

    /// I^{sc}_q for wavenumbers mu pi / L and mv pi / L, from the tables.
    double sc(int axis, int slot, int q, int mu, int mv) const {
        const int d = mu - mv;
        const double sd = d >= 0 ? js(axis, slot, q, d) : -js(axis, slot, q, -d);
        return 0.5 * (js(axis, slot, q, mu + mv) + sd);
    }

private:
    struct Key {
        int fam, axis, q;
        double alpha, ku, kv;
        bool operator<(const Key& o) const {
            return std::tie(fam, axis, q, alpha, ku, kv) < std::tie(o.fam, o.axis, o.q, o.alpha, o.ku, o.kv);
        }
    };

    double jc(int axis, int slot, int q, int j) const { return cos_[axis][slot](j, q); }
    double js(int axis, int slot, int q, int j) const { return sin_[axis][slot](j, q); }

    void build_axis(int axis, int jmax) {
        const double L = length_[axis];
        const double c = center_[axis];
        // one oscillation of the fastest transform per panel at most
        const int panels = std::max(32, jmax);
        const quad::Rule& rule = quad::gl_rule<20>();
        const int nodes = panels * static_cast<int>(rule.nodes.size());
        Eigen::VectorXd x(nodes), w(nodes);
        const double hw = 0.5 * L / panels;
        for (int p = 0, k = 0; p < panels; ++p) {
            const double mid = (2 * p + 1) * hw;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i, ++k) {
                x[k] = mid + hw * rule.nodes[i];
                w[k] = hw * rule.weights[i];
            }
        }
        Eigen::MatrixXd cosm(jmax + 1, nodes), sinm(jmax + 1, nodes);
        for (int j = 0; j <= jmax; ++j)
            for (int k = 0; k < nodes; ++k) {
                const double a = j * pi * x[k] / L;
                cosm(j, k) = std::cos(a);
                sinm(j, k) = std::sin(a);
            }
        cos_[axis].assign(alphas_.size(), {});
        sin_[axis].assign(alphas_.size(), {});
        for (std::size_t s = 0; s < alphas_.size(); ++s) {
            Eigen::MatrixXd weights(nodes, qmax_[s] + 1);
            for (int k = 0; k < nodes; ++k) {
                const double d = x[k] - c;
                double v = w[k] * std::exp(-alphas_[s] * d * d);
                for (int q = 0; q <= qmax_[s]; ++q) {
                    weights(k, q) = v;
                    v *= d;
                }
            }
            cos_[axis][s] = cosm * weights;
            sin_[axis][s] = sinm * weights;
        }
    }

    double length_[2] = {1.0, 1.0};
    double center_[2] = {0.0, 0.0};
    std::vector<double> alphas_;
    std::vector<int> qmax_;
    std::vector<Eigen::MatrixXd> cos_[2];
    std::vector<Eigen::MatrixXd> sin_[2];
    mutable std::shared_mutex mutex_;
    mutable std::map<Key, double> cache_;
};

enum class BasisTerm { xi_h0, confining_kr, confining_kphi, confining_cross, radial_kinetic, centrifugal, electric };

inline constexpr BasisTerm all_basis_terms[] = {BasisTerm::xi_h0,           BasisTerm::confining_kr,
                                                BasisTerm::confining_kphi,  BasisTerm::confining_cross,
                                                BasisTerm::radial_kinetic,  BasisTerm::centrifugal,
                                                BasisTerm::electric};

inline const char* to_string(BasisTerm t) {
    switch (t) {
        case BasisTerm::xi_h0: return "xi_H0";
        case BasisTerm::confining_kr: return "confining_kr";
        case BasisTerm::confining_kphi: return "confining_kphi";
        case BasisTerm::confining_cross: return "confining_cross";
        case BasisTerm::radial_kinetic: return "radial_kinetic";
        case BasisTerm::centrifugal: return "centrifugal";
        case BasisTerm::electric: return "electric";
    }
    return "?";
}

/// `corrected` sums the expansion of the operator as written; `printed`
/// keeps three slips of the published expressions (k_phi^2 series without
/// its n = 0 term, no k_r k_phi cross term, centrifugal products with sc in
/// place of ss and alpha_1 in place of alpha_n) so they can be compared.
enum class SeriesVariant { corrected, printed };

inline const char* to_string(SeriesVariant v) { return v == SeriesVariant::corrected ? "corrected" : "printed"; }

struct BasisOptions {
    double tol = 1e-13;        // relative truncation of each series
    int n_series_max = 400;
    SeriesVariant variant = SeriesVariant::corrected;
    bool strong_field = false;  // drop radial-kinetic and centrifugal terms
};

struct SeriesValue {
    double value = 0.0;
    int terms = 0;
    bool capped = false;
};

/// Matrix elements of each term between basis states, backed by tabulated
/// one-dimensional integrals.
class BasisModel {
public:
    BasisModel(const BilliardDomain& d, int n_basis, const BasisOptions& opt = {}) : domain_(d), opt_(opt) {
        if (!d.contour.is_rectangle()) throw DomainError("basis expansion needs a rectangular contour");
        if (!d.surface.is_gaussian() && !d.surface.is_flat())
            throw DomainError("basis expansion supports the gaussian bump (or a flat surface) only");
        if (!(opt.tol > 0.0)) throw DomainError("series tolerance must be positive");
        if (opt.n_series_max < 1) throw DomainError("n_series_max must be >= 1");
        if (!(d.field >= 0.0)) throw DomainError("field strength E0 must be >= 0");
        const auto& rect = d.contour.rectangle_shape();
        index_ = BasisIndex(rect.lx, rect.ly, n_basis);
        if (d.surface.is_gaussian()) {
            const auto& g = d.surface.gaussian_shape();
            // the ratio test also catches sigma within rounding of sigma_min
            if (!(g.sigma > sigma_min(g.volume)) || !(gaussian_series_ratio(g.volume, g.sigma) < 1.0))
                throw DomainError("sigma = " + std::to_string(g.sigma) + " is not above sigma_min = " +
                                  std::to_string(sigma_min(g.volume)) + "; the series in f'^2 diverges");
            sigma_ = g.sigma;
            height_ = g.volume / (2.0 * pi * g.sigma * g.sigma);
            b_ = square(height_ / (g.sigma * g.sigma));
        } else {
            sigma_ = 1.0;
            height_ = 0.0;
            b_ = 0.0;
        }
        ratio_ = b_ * sigma_ * sigma_ / std::exp(1.0);
        // rho^n (n + 1)(n + 2) bounds the n-th term relative to its prefactor
        n_cap_ = 1;
        while (n_cap_ < opt.n_series_max && std::pow(ratio_, n_cap_) * (n_cap_ + 1.0) * (n_cap_ + 2.0) > 1e-3 * opt.tol)
            ++n_cap_;
        n_cap_ = std::min(n_cap_ + 2, opt.n_series_max);
        energy_scale_ = index_[0].eps;

        binom_.assign(n_cap_ + 4, std::vector<double>(n_cap_ + 4, 0.0));
        for (int n = 0; n < n_cap_ + 4; ++n) {
            binom_[n][0] = 1.0;
            for (int k = 1; k <= n; ++k) binom_[n][k] = binom_[n - 1][k - 1] + (k <= n - 1 ? binom_[n - 1][k] : 0.0);
        }

        const Vec2 c = d.surface.center() - d.contour.lower_corner();
        table_ = std::make_unique<IntegralTable>(rect.lx, rect.ly, c);
        std::vector<double> alphas(n_cap_ + 2);
        std::vector<int> qmax(n_cap_ + 2);
        alphas[0] = 0.5 / (sigma_ * sigma_);
        qmax[0] = 0;
        for (int s = 1; s < n_cap_ + 2; ++s) {
            alphas[s] = s / (sigma_ * sigma_);
            qmax[s] = 2 * s + 2;
        }
        if (opt.variant == SeriesVariant::printed) qmax[1] = std::max(qmax[1], 2 * n_cap_ + 2);
        table_->tabulate(alphas, qmax, 2 * index_.max_m(), 2 * index_.max_n());
    }

    const BasisIndex& index() const { return index_; }
    const BilliardDomain& domain() const { return domain_; }
    const BasisOptions& options() const { return opt_; }
    const IntegralTable& table() const { return *table_; }
    int series_cap() const { return n_cap_; }
    /// sup f'^2, the ratio of the geometric series
    double series_ratio() const { return ratio_; }

    bool term_active(BasisTerm t) const {
        if (opt_.strong_field && (t == BasisTerm::radial_kinetic || t == BasisTerm::centrifugal)) return false;
        if (t == BasisTerm::electric) return domain_.field != 0.0 && height_ != 0.0;
        if (opt_.variant == SeriesVariant::printed && t == BasisTerm::confining_cross) return false;
        return true;
    }

    /// <u| term |v> in the planar inner product.
    SeriesValue element(BasisTerm term, int u, int v) const {
        const BasisState& su = index_[u];
        const BasisState& sv = index_[v];
        Pair p{*table_, su.m, sv.m, su.n, sv.n};
        const double w = 4.0 / index_.area();
        const double s2 = sigma_ * sigma_;
        const bool printed = opt_.variant == SeriesVariant::printed;
        if (!term_active(term)) {
            SeriesValue out;
            if (term == BasisTerm::xi_h0) out.value = u == v ? sv.eps : 0.0;
            return out;
        }
        switch (term) {
            case BasisTerm::xi_h0: {
                SeriesValue s = sum(1, [&](int n) { return sign(n) * std::pow(b_, n) * poly(p, n, n); }, 1.0);
                s.value = sv.eps * ((u == v ? 1.0 : 0.0) + w * s.value);
                return s;
            }
            case BasisTerm::confining_kr: {
                SeriesValue s = sum(0, [&](int n) {
                    const double a3 = 0.5 * (n + 1.0) * (n + 2.0);
                    return sign(n) * a3 * std::pow(b_, n + 1) *
                           (poly(p, n + 2, n + 1) / (s2 * s2) - 2.0 * poly(p, n + 1, n + 1) / s2 + poly(p, n, n + 1));
                });
                s.value *= -w / 8.0;
                return s;
            }
            case BasisTerm::confining_kphi: {
                SeriesValue s = sum(printed ? 1 : 0, [&](int n) { return sign(n) * std::pow(b_, n + 1) * poly(p, n, n + 1); });
                s.value *= -w / 8.0;
                return s;
            }
            case BasisTerm::confining_cross: {
                SeriesValue s = sum(0, [&](int n) {
                    return sign(n) * (n + 1.0) * std::pow(b_, n + 1) * (poly(p, n + 1, n + 1) / s2 - poly(p, n, n + 1));
                });
                s.value *= -w / 4.0;
                return s;
            }
            case BasisTerm::radial_kinetic: {
                SeriesValue s = sum(0, [&](int n) {
                    return -sign(n) * (n + 1.0) * std::pow(b_, n + 1) *
                           (radial(p, sv, n + 1, n + 1) / s2 - radial(p, sv, n, n + 1));
                });
                s.value *= 0.5 * w;
                return s;
            }
            case BasisTerm::centrifugal: {
                SeriesValue s = sum(1, [&](int n) { return -sign(n) * std::pow(b_, n) * centrifugal(p, sv, n, printed); });
                s.value *= 0.5 * w;
                return s;
            }
            case BasisTerm::electric: {
                SeriesValue s;
                s.value = -domain_.charge * domain_.field * height_ * w * p.ssx(0, 0) * p.ssy(0, 0);
                s.terms = 1;
                return s;
            }
        }
        return {};
    }

private:
    struct Pair {
        const IntegralTable& t;
        int mu, mv, nu, nv;
        double ssx(int slot, int q) const { return t.ss(0, slot, q, mu, mv); }
        double ssy(int slot, int q) const { return t.ss(1, slot, q, nu, nv); }
        double scx(int slot, int q) const { return t.sc(0, slot, q, mu, mv); }
        double scy(int slot, int q) const { return t.sc(1, slot, q, nu, nv); }
    };

    static double sign(int n) { return (n % 2 == 0) ? 1.0 : -1.0; }

    // int u r^{2m} e^{-alpha_slot r^2} v
    double poly(const Pair& p, int m, int slot) const {
        double acc = 0.0;
        for (int k = 0; k <= m; ++k) acc += binom_[m][k] * p.ssx(slot, 2 * (m - k)) * p.ssy(slot, 2 * k);
        return acc;
    }

    // int u r^{2m} e^{-alpha_slot r^2} (x d_x + y d_y) v
    double radial(const Pair& p, const BasisState& sv, int m, int slot) const {
        double acc = 0.0;
        for (int k = 0; k <= m; ++k)
            acc += binom_[m][k] * (sv.kx * p.scx(slot, 2 * (m - k) + 1) * p.ssy(slot, 2 * k) +
                                   sv.ky * p.ssx(slot, 2 * (m - k)) * p.scy(slot, 2 * k + 1));
        return acc;
    }

    // int u r^{2(n-1)} e^{-alpha r^2} L^2 v, with L^2 v expanded for v = sin sin
    double centrifugal(const Pair& p, const BasisState& sv, int n, bool printed) const {
        const int s = printed ? 1 : n;
        const double a = sv.kx, b = sv.ky;
        double acc = 0.0;
        for (int k = 0; k <= n - 1; ++k) {
            const double y0 = printed ? p.scy(s, 2 * k) : p.ssy(s, 2 * k);
            const double y2 = printed ? p.scy(s, 2 * k + 2) : p.ssy(s, 2 * k + 2);
            acc += binom_[n - 1][k] *
                   (b * b * p.ssx(s, 2 * (n - k)) * y0 + a * a * p.ssx(s, 2 * (n - 1 - k)) * y2 +
                    2.0 * a * b * p.scx(s, 2 * (n - k) - 1) * p.scy(s, 2 * k + 1) +
                    a * p.scx(s, 2 * (n - k) - 1) * p.ssy(s, 2 * k) + b * p.ssx(s, 2 * (n - 1 - k)) * p.scy(s, 2 * k + 1));
        }
        return acc;
    }

    // Sums term(n) from n0 until two successive terms fall below tol relative
    // to the running sum (or to `scale` when the sum is smaller).
    template <typename Term>
    SeriesValue sum(int n0, Term term, double scale = -1.0) const {
        if (scale < 0.0) scale = energy_scale_;
        SeriesValue out;
        if (b_ == 0.0) return out;
        int quiet = 0;
        for (int n = n0; n <= n_cap_; ++n) {
            const double t = term(n);
            out.value += t;
            ++out.terms;
            if (std::abs(t) <= opt_.tol * std::max(std::abs(out.value), 1e-3 * scale)) {
                if (++quiet >= 2) return out;
            } else {
                quiet = 0;
            }
        }
        out.capped = true;
        return out;
    }

    BilliardDomain domain_;
    BasisOptions opt_;
    BasisIndex index_;
    double sigma_ = 1.0;
    double height_ = 0.0;  // f(0) = V0 / (2 pi sigma^2)
    double b_ = 0.0;       // (V0 / (2 pi sigma^4))^2
    double ratio_ = 0.0;
    double energy_scale_ = 1.0;
    int n_cap_ = 1;
    std::vector<std::vector<double>> binom_;
    std::unique_ptr<IntegralTable> table_;
};

/// Convenience single-element entry point.
inline SeriesValue matrix_element(const BasisModel& model, BasisTerm term, int u, int v) {
    return model.element(term, u, v);
}

struct BasisOperator {
    Eigen::MatrixXd matrix;  // (H + H^T) / 2
    Eigen::MatrixXd raw;     // <u|H|v> as assembled; not symmetric in the planar inner product
    double asymmetry = 0.0;  // max |H - H^T| / max |H|
    BasisIndex index;
    bool strong_field = false;
    SeriesVariant variant = SeriesVariant::corrected;
    int max_terms = 0;
    long capped = 0;  // elements whose series hit the cap before the tolerance
    int series_cap = 0;
    double series_ratio = 0.0;
};

inline BasisOperator assemble_basis_hamiltonian(const BilliardDomain& d, int n_basis, const BasisOptions& opt = {}) {
    const BasisModel model(d, n_basis, opt);
    const int n = model.index().size();
    BasisOperator op;
    op.raw.resize(n, n);
    std::vector<int> terms(n, 0);
    std::vector<long> capped(n, 0);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t u) {
        for (int v = 0; v < n; ++v) {
            double h = 0.0;
            for (BasisTerm t : all_basis_terms) {
                const SeriesValue s = model.element(t, static_cast<int>(u), v);
                h += s.value;
                terms[u] = std::max(terms[u], s.terms);
                if (s.capped) ++capped[u];
            }
            op.raw(static_cast<Eigen::Index>(u), v) = h;
        }
    });
    op.matrix = 0.5 * (op.raw + op.raw.transpose());
    const double scale = op.raw.cwiseAbs().maxCoeff();
    op.asymmetry = scale > 0.0 ? (op.raw - op.raw.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
    op.index = model.index();
    op.strong_field = opt.strong_field;
    op.variant = opt.variant;
    op.max_terms = *std::max_element(terms.begin(), terms.end());
    for (long c : capped) op.capped += c;
    op.series_cap = model.series_cap();
    op.series_ratio = model.series_ratio();
    return op;
}

struct BasisSolution {
    EigenResult eigen;
    Spectrum spectrum;
    double max_imaginary = 0.0;  // only for the unsymmetrized route
};

/// Lowest `count` levels of the symmetrized matrix (dense LAPACK).
inline BasisSolution solve_basis(const BasisOperator& op, int count, bool want_vectors = false) {
    BasisSolution out;
    out.eigen = solve_dense(op.matrix, want_vectors, count);
    out.spectrum = make_spectrum(out.eigen.values, "basis");
    return out;
}

/// Eigenvalues of the raw (unsymmetrized) planar-basis matrix: real parts,
/// ascending, with the largest imaginary part reported.
inline BasisSolution solve_basis_unsymmetrized(const BasisOperator& op, int count) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(op.raw, false);
    if (es.info() != Eigen::Success) throw ToleranceError("unsymmetrized basis eigensolve failed");
    const Eigen::VectorXcd ev = es.eigenvalues();
    std::vector<std::pair<double, double>> vals;
    for (Eigen::Index i = 0; i < ev.size(); ++i) vals.emplace_back(ev[i].real(), ev[i].imag());
    std::sort(vals.begin(), vals.end());
    const int k = std::min<int>(count < 0 ? static_cast<int>(vals.size()) : count, static_cast<int>(vals.size()));
    BasisSolution out;
    std::vector<double> levels;
    for (int i = 0; i < k; ++i) {
        levels.push_back(vals[i].first);
        out.max_imaginary = std::max(out.max_imaginary, std::abs(vals[i].second));
    }
    out.eigen.values = levels;
    out.eigen.method = "eigen_general";
    out.spectrum = make_spectrum(std::move(levels), "basis");
    return out;
}

/// Eigenvector k sampled on an nx-by-ny interior grid, normalized so that
/// sum |psi|^2 hx hy = 1 (planar measure, matching the basis normalization).
inline WavefunctionGrid basis_wavefunction(const BasisOperator& op, const EigenResult& eig, int k, int nx, int ny) {
    if (eig.vectors.cols() <= k) throw DomainError("eigenvector " + std::to_string(k) + " was not computed");
    if (nx < 2 || ny < 2) throw DomainError("wavefunction grid needs nx, ny >= 2");
    const double lx = op.index.lx(), ly = op.index.ly();
    WavefunctionGrid w;
    w.nx = nx;
    w.ny = ny;
    w.hx = lx / (nx + 1);
    w.hy = ly / (ny + 1);
    w.origin = {w.hx, w.hy};
    w.energy = eig.values[k];
    w.index = k;
    w.normalization = "sum |psi|^2 hx hy = 1";
    w.values.assign(static_cast<std::size_t>(nx) * ny, 0.0);
    const Eigen::VectorXd c = eig.vectors.col(k);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            double s = 0.0;
            for (int u = 0; u < op.index.size(); ++u) s += c[u] * op.index.value(u, (i + 1) * w.hx, (j + 1) * w.hy);
            w.values[static_cast<std::size_t>(j) * nx + i] = s;
        }
    double norm = 0.0, big = 0.0;
    for (double v : w.values) {
        norm += v * v * w.hx * w.hy;
        if (std::abs(v) > std::abs(big)) big = v;
    }
    const double scale = (big < 0.0 ? -1.0 : 1.0) / std::sqrt(norm);
    for (double& v : w.values) v *= scale;
    return w;
}

}  // namespace nonplanar
