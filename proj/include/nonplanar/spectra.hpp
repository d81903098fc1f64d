#pragma once

// Level staircases, unfolding, nearest-neighbour spacing models
// (Poisson, GOE, superposed GOE, Berry-Robnik) and binless fitting.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "nonplanar/core.hpp"
#include "nonplanar/quadrature.hpp"

namespace nonplanar {

struct Spectrum {
    std::vector<double> levels;           // ascending
    std::vector<std::string> provenance;  // per-level tag, may be empty
    std::string source;                   // analytic, fdm, basis
    std::size_t n_use = 0;                // trusted prefix length

    std::size_t size() const { return levels.size(); }
};

/// Sorts levels (carrying provenance along) and sets n_use to the full length.
inline Spectrum make_spectrum(std::vector<double> levels, std::string source,
                              std::vector<std::string> provenance = {}) {
    Spectrum s;
    s.source = std::move(source);
    std::vector<std::size_t> order(levels.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return levels[a] < levels[b]; });
    for (std::size_t i : order) {
        s.levels.push_back(levels[i]);
        if (!provenance.empty()) s.provenance.push_back(provenance[i]);
    }
    s.n_use = s.levels.size();
    return s;
}

/// Number of levels at or below E.
inline std::size_t staircase(const Spectrum& s, double e) {
    return static_cast<std::size_t>(std::upper_bound(s.levels.begin(), s.levels.end(), e) - s.levels.begin());
}

/// Expected level count below E from the area (and optionally perimeter) of
/// the billiard.
inline double weyl_staircase(double e, double area, double perimeter, bool include_perimeter = false) {
    if (e < 0.0) throw DomainError("weyl_staircase requires E >= 0");
    const double k2 = 2.0 * mass * e / (hbar * hbar);
    double n = area / (4.0 * pi) * k2;
    if (include_perimeter) n -= perimeter / (4.0 * pi) * std::sqrt(k2);
    return n;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Least-squares y = slope * x + intercept.
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) throw DomainError("fit_line needs at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

/// Linear fit of the staircase i = 1..n against E_i over the first n levels.
inline LinearFit staircase_fit(const Spectrum& s, std::size_t n) {
    n = std::min(n, s.levels.size());
    std::vector<double> x(s.levels.begin(), s.levels.begin() + n), y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<double>(i + 1);
    return fit_line(x, y);
}

/// Longest prefix whose staircase stays within `tolerance * n` of its own
/// linear fit; never shorter than `minimum` (or the spectrum length).
inline std::size_t trusted_prefix(const Spectrum& s, double tolerance = 0.02, std::size_t minimum = 50) {
    const std::size_t total = s.levels.size();
    if (total <= minimum) return total;
    // running sums make each fit O(1); the deviation scan is O(n)
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t best = minimum;
    for (std::size_t n = 1; n <= total; ++n) {
        const double x = s.levels[n - 1], y = static_cast<double>(n);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        if (n < minimum) continue;
        const double den = n * sxx - sx * sx;
        if (den <= 0.0) continue;
        const double a = (n * sxy - sx * sy) / den;
        const double b = (sy - a * sx) / n;
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            worst = std::max(worst, std::abs(static_cast<double>(i + 1) - (a * s.levels[i] + b)));
        if (worst <= tolerance * static_cast<double>(n)) best = n;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Unfolding

enum class UnfoldMethod { mean_density, weyl_fit };

struct SpacingSample {
    std::vector<double> spacings;
    UnfoldMethod method = UnfoldMethod::weyl_fit;
    std::vector<double> fit_coefficients;  // weyl_fit: a, b, c
};

/// Nearest-neighbour spacings of the first n_use levels, scaled to mean 1.
/// weyl_fit maps E to a E + b sqrt(E - E_shift) + c fitted to the staircase,
/// with E_shift = min(E_1, 0) so negative levels stay in the domain.
inline SpacingSample unfold(const Spectrum& s, UnfoldMethod method = UnfoldMethod::weyl_fit) {
    const std::size_t n = s.n_use == 0 ? s.levels.size() : std::min(s.n_use, s.levels.size());
    if (n < 50) throw DomainError("unfold needs at least 50 trusted levels, got " + std::to_string(n));
    SpacingSample out;
    out.method = method;
    std::vector<double> mapped(n);
    if (method == UnfoldMethod::mean_density) {
        const double e1 = s.levels.front(), en = s.levels[n - 1];
        if (!(en > e1)) throw DomainError("unfold: spectrum has zero width");
        for (std::size_t i = 0; i < n; ++i) mapped[i] = (s.levels[i] - e1) * static_cast<double>(n - 1) / (en - e1);
    } else {
        const double shift = std::min(s.levels.front(), 0.0);
        Eigen::MatrixXd a(n, 3);
        Eigen::VectorXd y(n);
        for (std::size_t i = 0; i < n; ++i) {
            a(i, 0) = s.levels[i];
            a(i, 1) = std::sqrt(s.levels[i] - shift);
            a(i, 2) = 1.0;
            y[i] = static_cast<double>(i + 1);
        }
        const Eigen::Vector3d c = a.colPivHouseholderQr().solve(y);
        if (!(c[0] > 0.0)) throw DomainError("unfold: degenerate Weyl fit (leading coefficient <= 0)");
        out.fit_coefficients = {c[0], c[1], c[2]};
        for (std::size_t i = 0; i < n; ++i) mapped[i] = a.row(i).dot(c);
    }
    out.spacings.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) out.spacings[i] = mapped[i + 1] - mapped[i];
    const double mean = std::accumulate(out.spacings.begin(), out.spacings.end(), 0.0) / out.spacings.size();
    if (!(mean > 0.0)) throw DomainError("unfold: non-positive mean spacing");
    for (double& x : out.spacings) x = std::max(x / mean, 0.0);
    // clamping can only remove round-off sized negatives; renormalize exactly
    const double mean2 = std::accumulate(out.spacings.begin(), out.spacings.end(), 0.0) / out.spacings.size();
    for (double& x : out.spacings) x /= mean2;
    return out;
}

// ---------------------------------------------------------------------------
// Spacing models

enum class SpacingModel { poisson, goe, goe2, goe2_printed, berry_robnik };

inline const char* to_string(SpacingModel m) {
    switch (m) {
    case SpacingModel::poisson: return "poisson";
    case SpacingModel::goe: return "goe";
    case SpacingModel::goe2: return "goe2";
    case SpacingModel::goe2_printed: return "goe2_printed";
    case SpacingModel::berry_robnik: return "berry_robnik";
    }
    return "unknown";
}

/// Spacing density. goe2 is the superposition of two independent GOE
/// sequences, d^2/ds^2 erfc(sqrt(pi) s / 4)^2; goe2_printed keeps the pi/10
/// exponent of the printed formula, which is not normalized.
inline double spacing_pdf(SpacingModel model, double s, double rho1 = 0.0) {
    if (!(s >= 0.0)) throw DomainError("spacing_pdf requires s >= 0");
    switch (model) {
    case SpacingModel::poisson: return std::exp(-s);
    case SpacingModel::goe: return 0.5 * pi * s * std::exp(-0.25 * pi * s * s);
    case SpacingModel::goe2:
        return 0.5 * std::exp(-pi * s * s / 8.0) +
               pi * s / 8.0 * std::exp(-pi * s * s / 16.0) * std::erfc(std::sqrt(pi) * s / 4.0);
    case SpacingModel::goe2_printed:
        return 0.5 * std::exp(-pi * s * s / 8.0) +
               pi * s / 8.0 * std::exp(-pi * s * s / 10.0) * std::erfc(std::sqrt(pi) * s / 4.0);
    case SpacingModel::berry_robnik: {
        if (!(rho1 >= 0.0 && rho1 <= 1.0)) throw DomainError("Berry-Robnik rho1 must lie in [0, 1]");
        const double rb = 1.0 - rho1;
        return rho1 * rho1 * std::exp(-rho1 * s) * std::erfc(0.5 * std::sqrt(pi) * rb * s) +
               (2.0 * rho1 * rb + 0.5 * pi * rb * rb * rb * s) * std::exp(-rho1 * s - 0.25 * pi * rb * rb * s * s);
    }
    }
    return 0.0;
}

namespace detail {

// Cumulative distribution on a uniform grid, integrated panel by panel with
// 10-point Gauss-Legendre and interpolated by cubic Hermite using the pdf as
// the derivative.
class CdfTable {
public:
    CdfTable(SpacingModel model, double rho1) : model_(model), rho1_(rho1) {
        const int cells = static_cast<int>(s_max / step);
        cdf_.resize(cells + 1);
        pdf_.resize(cells + 1);
        cdf_[0] = 0.0;
        pdf_[0] = spacing_pdf(model, 0.0, rho1);
        const quad::Rule& rule = quad::gl_rule<10>();
        for (int i = 0; i < cells; ++i) {
            const double a = i * step, b = (i + 1) * step;
            cdf_[i + 1] = cdf_[i] + quad::apply_rule(rule, [&](double s) { return spacing_pdf(model, s, rho1); }, a, b);
            pdf_[i + 1] = spacing_pdf(model, b, rho1);
        }
    }

    double operator()(double s) const {
        if (s <= 0.0) return 0.0;
        if (s >= s_max) return cdf_.back();
        const int i = static_cast<int>(s / step);
        const double t = (s - i * step) / step;
        const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
        const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
        return h00 * cdf_[i] + h10 * step * pdf_[i] + h01 * cdf_[i + 1] + h11 * step * pdf_[i + 1];
    }

    static constexpr double s_max = 40.0;
    static constexpr double step = 0.005;

private:
    SpacingModel model_;
    double rho1_;
    std::vector<double> cdf_, pdf_;
};

inline const CdfTable& cdf_table(SpacingModel model, double rho1) {
    static std::mutex mu;
    static std::map<std::pair<int, double>, std::unique_ptr<CdfTable>> cache;
    const double key_rho = model == SpacingModel::berry_robnik ? rho1 : 0.0;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{static_cast<int>(model), key_rho}];
    if (!slot) slot = std::make_unique<CdfTable>(model, key_rho);
    return *slot;
}

}  // namespace detail

inline double spacing_cdf(SpacingModel model, double s, double rho1 = 0.0) {
    return detail::cdf_table(model, rho1)(s);
}

/// Kolmogorov-Smirnov sup distance between the sample's empirical CDF and
/// the model CDF.
inline double ks_distance(std::vector<double> sample, SpacingModel model, double rho1 = 0.0) {
    if (sample.empty()) throw DomainError("ks_distance on an empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    const auto& cdf = detail::cdf_table(model, rho1);
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return std::clamp(d, 0.0, 1.0);
}

struct Histogram {
    double width = 0.0;
    std::vector<double> edges;    // size bins + 1
    std::vector<double> density;  // normalized so the area is 1
    std::vector<std::size_t> counts;
};

/// Freedman-Diaconis binning over [0, max(sample)].
inline Histogram histogram(const std::vector<double>& sample) {
    if (sample.empty()) throw DomainError("histogram of an empty sample");
    std::vector<double> s = sample;
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    auto quantile = [&](double p) {
        const double pos = p * (n - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, n - 1);
        return s[lo] + (pos - lo) * (s[hi] - s[lo]);
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    const double top = std::max(s.back(), 1e-12);
    double width = 2.0 * iqr / std::cbrt(static_cast<double>(n));
    if (!(width > 0.0)) width = top / std::max(1.0, std::ceil(std::sqrt(static_cast<double>(n))));
    const std::size_t bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(top / width)));
    Histogram h;
    h.width = width;
    h.counts.assign(bins, 0);
    for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(b * width);
    for (double x : s) h.counts[std::min(bins - 1, static_cast<std::size_t>(x / width))]++;
    for (std::size_t c : h.counts) h.density.push_back(c / (n * width));
    return h;
}

struct FitResult {
    SpacingModel model = SpacingModel::berry_robnik;
    double rho1 = 0.0;
    double rho1_low = 0.0;  // 95% band from the observed Fisher information
    double rho1_high = 1.0;
    double ks_distance = 0.0;
    double chi2_per_bin = 0.0;
    std::size_t n_sample = 0;
    std::size_t jittered = 0;  // zero spacings moved to 1e-12
    double neg_log_likelihood = 0.0;
};

inline double chi2_per_bin(const std::vector<double>& sample, SpacingModel model, double rho1 = 0.0) {
    const Histogram h = histogram(sample);
    const double n = static_cast<double>(sample.size());
    double chi2 = 0.0;
    int used = 0;
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        const double expected = n * (spacing_cdf(model, h.edges[b + 1], rho1) - spacing_cdf(model, h.edges[b], rho1));
        if (expected <= 0.0) continue;
        chi2 += square(h.counts[b] - expected) / expected;
        ++used;
    }
    return used > 0 ? chi2 / used : 0.0;
}

/// Goodness of fit of a parameter-free model.
inline FitResult evaluate_model(const std::vector<double>& sample, SpacingModel model) {
    FitResult r;
    r.model = model;
    r.n_sample = sample.size();
    r.ks_distance = ks_distance(sample, model);
    r.chi2_per_bin = chi2_per_bin(sample, model);
    return r;
}

/// Maximum-likelihood Berry-Robnik mixing parameter by golden-section search
/// started on three sub-intervals of [0, 1].
inline FitResult fit_berry_robnik(const std::vector<double>& sample) {
    if (sample.size() < 300) throw DomainError("fit_berry_robnik needs at least 300 spacings");
    FitResult r;
    r.model = SpacingModel::berry_robnik;
    r.n_sample = sample.size();
    std::vector<double> s = sample;
    for (double& x : s) {
        if (!(x >= 0.0)) throw DomainError("negative or non-finite spacing in sample");
        if (x == 0.0) {
            x = 1e-12;
            ++r.jittered;
        }
    }
    auto nll = [&](double rho) {
        double acc = 0.0;
        for (double x : s) acc -= std::log(spacing_pdf(SpacingModel::berry_robnik, x, rho));
        return acc;
    };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double best_rho = 0.0, best_val = std::numeric_limits<double>::infinity();
    for (int start = 0; start < 3; ++start) {
        double a = start / 3.0, b = (start + 1) / 3.0;
        double c = b - g * (b - a), d = a + g * (b - a);
        double fc = nll(c), fd = nll(d);
        while (b - a > 1e-9) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = nll(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = nll(d);
            }
        }
        for (double cand : {a, b, 0.5 * (a + b)}) {
            const double v = nll(cand);
            if (v < best_val) {
                best_val = v;
                best_rho = cand;
            }
        }
    }
    for (double edge : {0.0, 1.0}) {
        const double v = nll(edge);
        if (v < best_val) {
            best_val = v;
            best_rho = edge;
        }
    }
    if (!std::isfinite(best_val)) throw DomainError("Berry-Robnik likelihood is not finite");
    r.rho1 = best_rho;
    r.neg_log_likelihood = best_val;
    // observed information by a one-sided difference near the boundaries
    const double h = 1e-4;
    const double lo = std::clamp(best_rho - h, 0.0, 1.0 - 2 * h);
    const double f0 = nll(lo), f1 = nll(lo + h), f2 = nll(lo + 2 * h);
    const double info = (f2 - 2.0 * f1 + f0) / (h * h);
    const double se = info > 0.0 ? 1.0 / std::sqrt(info) : 1.0;
    r.rho1_low = std::max(0.0, best_rho - 1.96 * se);
    r.rho1_high = std::min(1.0, best_rho + 1.96 * se);
    r.ks_distance = ks_distance(sample, SpacingModel::berry_robnik, best_rho);
    r.chi2_per_bin = chi2_per_bin(sample, SpacingModel::berry_robnik, best_rho);
    return r;
}

}  // namespace nonplanar
