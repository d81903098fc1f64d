#pragma once

// Run configuration: a sectioned key = value text format checked against a
// fixed schema. Every key has an explicit default, so the resolved form is
// complete and hashes to a stable identifier.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nonplanar/basis.hpp"
#include "nonplanar/classical.hpp"
#include "nonplanar/core.hpp"
#include "nonplanar/fdm.hpp"
#include "nonplanar/geometry.hpp"
#include "nonplanar/spectra.hpp"

namespace nonplanar::config {

using Sections = std::map<std::string, std::map<std::string, std::string>>;

inline std::string trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(a, b - a + 1));
}

/// Parses "[section]" headers and "key = value" lines. '#' and ';' start
/// comments; duplicate keys and keys outside a section are errors.
inline Sections parse_ini(std::string_view text, const std::string& origin = "<config>") {
    Sections out;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto cut = raw.find_first_of("#;");
        const std::string line = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            out[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        if (section.empty()) throw ConfigError(where + ": key outside of any section");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (!out[section].emplace(key, value).second) throw ConfigError(where + ": duplicate key " + section + "." + key);
    }
    return out;
}

inline Sections read_ini(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_ini(ss.str(), path);
}

enum class ValueType { integer, real, boolean, text, choice };

struct KeySpec {
    std::string section;
    std::string key;
    ValueType type = ValueType::text;
    std::string default_value;
    std::vector<std::string> choices;
    double min = -std::numeric_limits<double>::infinity();
    double max = std::numeric_limits<double>::infinity();
    bool min_exclusive = false;
};

inline const std::vector<KeySpec>& schema() {
    using V = ValueType;
    const double inf = std::numeric_limits<double>::infinity();
    static const std::vector<KeySpec> keys = {
        {"run", "mode", V::choice, "spectrum", {"trajectory", "poincare", "spectrum", "unfold-fit", "wavefunction"}},
        {"run", "seed", V::integer, "1", {}, 0, 9.0e18},
        {"run", "output", V::text, "out"},

        {"domain", "contour", V::choice, "rectangle", {"rectangle", "circle"}},
        {"domain", "lx", V::real, "1", {}, 0, inf, true},
        {"domain", "ly", V::real, "1", {}, 0, inf, true},
        {"domain", "radius", V::real, "1", {}, 0, inf, true},
        {"domain", "circle_x", V::real, "0"},
        {"domain", "circle_y", V::real, "0"},
        {"domain", "profile", V::choice, "flat", {"flat", "cone", "gaussian"}},
        {"domain", "f0", V::real, "0", {}, 0, inf},
        {"domain", "base_radius", V::real, "1", {}, 0, inf, true},
        {"domain", "volume", V::real, "1", {}, 0, inf, true},
        {"domain", "sigma", V::real, "0.8", {}, 0, inf, true},
        {"domain", "center_x", V::real, "0"},
        {"domain", "center_y", V::real, "0"},
        {"domain", "field", V::real, "0", {}, 0, inf},
        {"domain", "charge", V::real, "-1"},
        {"domain", "confining_form", V::choice, "derived", {"derived", "printed"}},

        {"solver", "kind", V::choice, "fdm", {"analytic", "fdm", "basis"}},
        {"solver", "count", V::integer, "100", {}, 1, 1e7},
        {"solver", "nx", V::integer, "80", {}, 2, 1e5},
        {"solver", "ny", V::integer, "80", {}, 2, 1e5},
        {"solver", "method", V::choice, "automatic", {"automatic", "dense", "banded", "lanczos"}},
        {"solver", "strong_field", V::boolean, "false"},
        {"solver", "basis_size", V::integer, "400", {}, 1, 1e5},
        {"solver", "series_tol", V::real, "1e-13", {}, 0, 1, true},
        {"solver", "series_max", V::integer, "400", {}, 1, 1e5},
        {"solver", "series_variant", V::choice, "corrected", {"corrected", "printed"}},
        {"solver", "include_m0", V::boolean, "true"},
        {"solver", "core_fraction", V::real, "0.01", {}, 0, 1, true},
        {"solver", "state", V::integer, "0", {}, 0, 1e7},

        {"classical", "energy", V::real, "0.5", {}, 0, inf, true},
        {"classical", "x0", V::real, "0.3"},
        {"classical", "y0", V::real, "0.2"},
        {"classical", "angle", V::real, "0.7"},
        {"classical", "collisions", V::integer, "100", {}, 1, 1e8},
        {"classical", "record_every", V::integer, "10", {}, 1, 1e9},
        {"classical", "n_initial", V::integer, "30", {}, 1, 1e7},
        {"classical", "n_collisions", V::integer, "200", {}, 1, 1e8},
        {"classical", "dt", V::real, "0", {}, 0, inf},
        {"classical", "drift_tol", V::real, "1e-7", {}, 0, inf, true},
        {"classical", "s_bins", V::integer, "8", {}, 1, 1e6},
        {"classical", "alpha_bins", V::integer, "360", {}, 1, 1e6},

        {"statistics", "input", V::text, ""},
        {"statistics", "unfold", V::choice, "weyl_fit", {"weyl_fit", "mean_density"}},
        {"statistics", "trusted_tolerance", V::real, "0.02", {}, 0, 1, true},
        {"statistics", "trusted_minimum", V::integer, "50", {}, 2, 1e7},
        {"statistics", "n_use", V::integer, "0", {}, 0, 1e7},
    };
    return keys;
}

inline const KeySpec* find_key(const std::string& section, const std::string& key) {
    for (const auto& k : schema())
        if (k.section == section && k.key == key) return &k;
    return nullptr;
}

inline void check_value(const KeySpec& spec, const std::string& value) {
    const std::string name = spec.section + "." + spec.key;
    auto range = [&](double x) {
        if (x < spec.min || x > spec.max || (spec.min_exclusive && x == spec.min))
            throw ConfigError(name + " = " + value + " is out of range");
    };
    switch (spec.type) {
        case ValueType::integer: {
            long long v = 0;
            const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
            if (r.ec != std::errc() || r.ptr != value.data() + value.size())
                throw ConfigError(name + " expects an integer, got '" + value + "'");
            range(static_cast<double>(v));
            break;
        }
        case ValueType::real: {
            double v = 0.0;
            const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
            if (r.ec != std::errc() || r.ptr != value.data() + value.size() || !std::isfinite(v))
                throw ConfigError(name + " expects a finite number, got '" + value + "'");
            range(v);
            break;
        }
        case ValueType::boolean:
            if (value != "true" && value != "false") throw ConfigError(name + " expects true or false, got '" + value + "'");
            break;
        case ValueType::choice:
            if (std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end()) {
                std::string all;
                for (const auto& c : spec.choices) all += (all.empty() ? "" : "|") + c;
                throw ConfigError(name + " must be one of " + all + ", got '" + value + "'");
            }
            break;
        case ValueType::text:
            break;
    }
}

/// Every schema key with its effective value.
class Resolved {
public:
    const std::string& text(const std::string& name) const {
        const auto it = values_.find(name);
        if (it == values_.end()) throw ConfigError("unknown config key " + name);
        return it->second;
    }
    long long integer(const std::string& name) const { return std::stoll(text(name)); }
    double real(const std::string& name) const {
        const std::string& s = text(name);
        double v = 0.0;
        std::from_chars(s.data(), s.data() + s.size(), v);
        return v;
    }
    bool boolean(const std::string& name) const { return text(name) == "true"; }

    void set(const std::string& name, const std::string& value) { values_[name] = value; }
    const std::map<std::string, std::string>& values() const { return values_; }

    /// "section.key=value" lines in key order; the hash input. The output
    /// directory is left out so a run hashes the same wherever it writes.
    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : values_)
            if (k != "run.output") out += k + "=" + v + "\n";
        return out;
    }

    /// FNV-1a (64 bit) of the canonical text, 16 hex digits.
    std::string hash() const {
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : canonical()) {
            h ^= c;
            h *= 1099511628211ull;
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

private:
    std::map<std::string, std::string> values_;
};

/// Applies "section.key=value" overrides on top of the parsed file, checks
/// every key against the schema and fills defaults.
inline Resolved resolve(const Sections& file, const std::vector<std::string>& overrides = {}) {
    Sections merged = file;
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        const auto dot = o.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq)
            throw ConfigError("override '" + o + "' is not of the form section.key=value");
        merged[trim(o.substr(0, dot))][trim(o.substr(dot + 1, eq - dot - 1))] = trim(o.substr(eq + 1));
    }
    for (const auto& [section, keys] : merged)
        for (const auto& [key, value] : keys) {
            const KeySpec* spec = find_key(section, key);
            if (!spec) throw ConfigError("unknown config key " + section + "." + key);
            check_value(*spec, value);
        }
    Resolved r;
    for (const auto& spec : schema()) {
        const std::string name = spec.section + "." + spec.key;
        std::string value = spec.default_value;
        const auto s = merged.find(spec.section);
        if (s != merged.end()) {
            const auto k = s->second.find(spec.key);
            if (k != s->second.end()) value = k->second;
        }
        r.set(name, value);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Typed view

enum class Mode { trajectory, poincare, spectrum, unfold_fit, wavefunction };

inline Mode parse_mode(const std::string& s) {
    if (s == "trajectory") return Mode::trajectory;
    if (s == "poincare") return Mode::poincare;
    if (s == "spectrum") return Mode::spectrum;
    if (s == "unfold-fit") return Mode::unfold_fit;
    if (s == "wavefunction") return Mode::wavefunction;
    throw ConfigError("unknown mode " + s);
}

enum class SolverKind { analytic, fdm, basis };

struct RunConfig {
    Resolved resolved;
    Mode mode = Mode::spectrum;
    std::uint64_t seed = 1;
    std::string output;
    BilliardDomain domain;
    ConfiningForm form = ConfiningForm::derived;

    SolverKind solver = SolverKind::fdm;
    int count = 100;
    int nx = 80, ny = 80;
    FdmSolver method = FdmSolver::automatic;
    BasisOptions basis;
    int basis_size = 400;
    bool include_m0 = true;
    double core_fraction = 1e-2;
    int state = 0;

    double energy = 0.5;
    Vec2 start{};
    double angle = 0.0;
    int collisions = 100;
    int record_every = 10;
    int n_initial = 30;
    int n_collisions = 200;
    double dt = 0.0;
    double drift_tol = 1e-7;
    int s_bins = 8, alpha_bins = 360;

    std::string input;
    UnfoldMethod unfold = UnfoldMethod::weyl_fit;
    double trusted_tolerance = 0.02;
    int trusted_minimum = 50;
    int n_use = 0;

    /// f0 / R of an analytic circular cone.
    double cone_ratio() const {
        return domain.surface.is_cone() ? domain.surface.cone_shape().f0 / domain.surface.cone_shape().base_radius : 0.0;
    }
};

/// Builds the typed configuration and applies the cross-key rules.
inline RunConfig build(const Resolved& r) {
    RunConfig c;
    c.resolved = r;
    c.mode = parse_mode(r.text("run.mode"));
    c.seed = static_cast<std::uint64_t>(r.integer("run.seed"));
    c.output = r.text("run.output");

    const bool circle = r.text("domain.contour") == "circle";
    const Contour contour = circle ? Contour::circle(r.real("domain.radius"), {r.real("domain.circle_x"), r.real("domain.circle_y")})
                                   : Contour::rectangle(r.real("domain.lx"), r.real("domain.ly"));
    const Vec2 center{r.real("domain.center_x"), r.real("domain.center_y")};
    const std::string profile = r.text("domain.profile");
    SurfaceProfile surface = SurfaceProfile::flat(center);
    if (profile == "cone") surface = SurfaceProfile::cone(r.real("domain.f0"), r.real("domain.base_radius"), center);
    if (profile == "gaussian") surface = SurfaceProfile::gaussian(r.real("domain.volume"), r.real("domain.sigma"), center);
    c.domain = BilliardDomain{contour, surface, r.real("domain.field"), r.real("domain.charge")};
    c.form = r.text("domain.confining_form") == "printed" ? ConfiningForm::printed : ConfiningForm::derived;
    if (surface.is_cone() && !(contour.signed_distance(center) > 0.0))
        throw ConfigError("domain.center must lie strictly inside the contour for a cone");

    const std::string kind = r.text("solver.kind");
    c.solver = kind == "analytic" ? SolverKind::analytic : kind == "basis" ? SolverKind::basis : SolverKind::fdm;
    c.count = static_cast<int>(r.integer("solver.count"));
    c.nx = static_cast<int>(r.integer("solver.nx"));
    c.ny = static_cast<int>(r.integer("solver.ny"));
    const std::string method = r.text("solver.method");
    c.method = method == "dense"     ? FdmSolver::dense
               : method == "banded"  ? FdmSolver::banded
               : method == "lanczos" ? FdmSolver::lanczos
                                     : FdmSolver::automatic;
    c.basis.strong_field = r.boolean("solver.strong_field");
    c.basis.tol = r.real("solver.series_tol");
    c.basis.n_series_max = static_cast<int>(r.integer("solver.series_max"));
    c.basis.variant = r.text("solver.series_variant") == "printed" ? SeriesVariant::printed : SeriesVariant::corrected;
    c.basis_size = static_cast<int>(r.integer("solver.basis_size"));
    c.include_m0 = r.boolean("solver.include_m0");
    c.core_fraction = r.real("solver.core_fraction");
    c.state = static_cast<int>(r.integer("solver.state"));

    c.energy = r.real("classical.energy");
    c.start = {r.real("classical.x0"), r.real("classical.y0")};
    c.angle = r.real("classical.angle");
    c.collisions = static_cast<int>(r.integer("classical.collisions"));
    c.record_every = static_cast<int>(r.integer("classical.record_every"));
    c.n_initial = static_cast<int>(r.integer("classical.n_initial"));
    c.n_collisions = static_cast<int>(r.integer("classical.n_collisions"));
    c.dt = r.real("classical.dt");
    c.drift_tol = r.real("classical.drift_tol");
    c.s_bins = static_cast<int>(r.integer("classical.s_bins"));
    c.alpha_bins = static_cast<int>(r.integer("classical.alpha_bins"));

    c.input = r.text("statistics.input");
    c.unfold = r.text("statistics.unfold") == "mean_density" ? UnfoldMethod::mean_density : UnfoldMethod::weyl_fit;
    c.trusted_tolerance = r.real("statistics.trusted_tolerance");
    c.trusted_minimum = static_cast<int>(r.integer("statistics.trusted_minimum"));
    c.n_use = static_cast<int>(r.integer("statistics.n_use"));

    const bool needs_solver = c.mode == Mode::spectrum || c.mode == Mode::wavefunction ||
                              (c.mode == Mode::unfold_fit && c.input.empty());
    if (needs_solver && c.solver == SolverKind::analytic) {
        if (!circle) throw ConfigError("solver.kind = analytic needs domain.contour = circle");
        if (surface.is_gaussian()) throw ConfigError("solver.kind = analytic supports flat or cone profiles only");
        if ((center - contour.circle_shape().center).norm() > 1e-12)
            throw ConfigError("solver.kind = analytic needs the cone apex at the circle center");
        if (surface.is_cone() && std::abs(surface.cone_shape().base_radius - contour.circle_shape().radius) > 1e-12)
            throw ConfigError("solver.kind = analytic needs domain.base_radius = domain.radius");
        if (c.domain.field != 0.0) throw ConfigError("solver.kind = analytic has no electric field term");
        if (c.mode == Mode::wavefunction) throw ConfigError("wavefunction mode needs solver.kind = fdm or basis");
    }
    if (needs_solver && c.solver == SolverKind::basis) {
        if (circle) throw ConfigError("solver.kind = basis needs domain.contour = rectangle");
        if (surface.is_cone()) throw ConfigError("solver.kind = basis supports flat or gaussian profiles only");
        if (surface.is_gaussian()) {
            const double smin = sigma_min(surface.gaussian_shape().volume);
            if (!(surface.gaussian_shape().sigma > smin) ||
                !(gaussian_series_ratio(surface.gaussian_shape().volume, surface.gaussian_shape().sigma) < 1.0))
                throw ConfigError("domain.sigma must exceed sigma_min = " + std::to_string(smin) +
                                  " for the basis series to converge");
        }
        if (c.count > c.basis_size) throw ConfigError("solver.count exceeds solver.basis_size");
    }
    if (needs_solver && c.solver == SolverKind::fdm && c.count > c.nx * c.ny)
        throw ConfigError("solver.count exceeds the number of grid unknowns");
    if (c.mode == Mode::trajectory && !(contour.signed_distance(c.start) > 0.0))
        throw ConfigError("classical.x0, classical.y0 must lie strictly inside the contour");
    return c;
}

}  // namespace nonplanar::config
