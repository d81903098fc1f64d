#pragma once

// One run per config: compute, write artifacts named by the config hash,
// and record what was checked in the metadata JSON.

#include <json.hpp>

#include <Eigen/Core>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nonplanar/analytic_cone.hpp"
#include "nonplanar/basis.hpp"
#include "nonplanar/classical.hpp"
#include "nonplanar/config.hpp"
#include "nonplanar/core.hpp"
#include "nonplanar/fdm.hpp"
#include "nonplanar/io.hpp"
#include "nonplanar/spectra.hpp"

namespace nonplanar {

inline constexpr const char* version_string = "0.1.0";

struct RunCheck {
    std::string name;
    bool passed = true;
    double value = 0.0;
    double limit = 0.0;
};

struct RunReport {
    int exit_code = 0;
    std::string config_hash;
    std::vector<std::string> outputs;  // file names inside the output directory
    std::vector<std::string> warnings;
    std::vector<RunCheck> checks;
    nlohmann::json results = nlohmann::json::object();
    std::size_t n_use = 0;
};

namespace detail {

struct SolvedSpectrum {
    Spectrum spectrum;
    std::optional<DiscreteOperator> fdm_op;
    std::optional<BasisOperator> basis_op;
    EigenResult eigen;
    nlohmann::json info = nlohmann::json::object();
};

inline void add_check(RunReport& rep, std::string name, double value, double limit) {
    rep.checks.push_back({std::move(name), value <= limit, value, limit});
}

inline SolvedSpectrum solve_spectrum(const config::RunConfig& c, bool want_vectors, RunReport& rep) {
    SolvedSpectrum out;
    const int count = want_vectors ? std::max(c.count, c.state + 1) : c.count;
    switch (c.solver) {
        case config::SolverKind::analytic: {
            ConeOptions opt;
            opt.radius = c.domain.contour.circle_shape().radius;
            opt.form = c.form;
            opt.include_m0 = c.include_m0;
            opt.core_fraction = c.core_fraction;
            const ConeSpectrum cs = cone_lowest_levels(c.cone_ratio(), count, opt);
            out.spectrum = cs.spectrum;
            out.info["xi0"] = cs.xi0;
            out.info["flagged_channels"] = cs.flagged;
            for (const auto& f : cs.flagged) rep.warnings.push_back("cone channel " + f);
            break;
        }
        case config::SolverKind::fdm: {
            const GridSpec grid = make_grid(c.domain.contour, c.nx, c.ny);
            out.fdm_op = assemble(c.domain, grid, c.basis.strong_field, c.form);
            FdmSolution sol = solve_fdm(*out.fdm_op, count, want_vectors, c.method, c.seed);
            out.spectrum = sol.spectrum;
            out.eigen = std::move(sol.eigen);
            out.info["unknowns"] = out.fdm_op->dim();
            out.info["nonzeros"] = out.fdm_op->matrix.nonZeros();
            out.info["method"] = out.eigen.method;
            out.info["iterations"] = out.eigen.iterations;
            out.info["asymmetry"] = out.fdm_op->asymmetry;
            add_check(rep, "fdm_operator_symmetry", out.fdm_op->asymmetry, 1e-12);
            if (!out.eigen.residuals.empty()) {
                double worst = 0.0;
                for (std::size_t i = 0; i < out.eigen.residuals.size(); ++i)
                    worst = std::max(worst, out.eigen.residuals[i] / std::max(std::abs(out.eigen.values[i]), 1.0));
                add_check(rep, "eigen_relative_residual", worst, 1e-6);
            }
            break;
        }
        case config::SolverKind::basis: {
            out.basis_op = assemble_basis_hamiltonian(c.domain, c.basis_size, c.basis);
            BasisSolution sol = solve_basis(*out.basis_op, count, want_vectors);
            out.spectrum = sol.spectrum;
            out.eigen = std::move(sol.eigen);
            out.info["basis_size"] = out.basis_op->index.size();
            out.info["asymmetry"] = out.basis_op->asymmetry;
            out.info["series_variant"] = to_string(out.basis_op->variant);
            out.info["series_cap"] = out.basis_op->series_cap;
            out.info["series_ratio"] = out.basis_op->series_ratio;
            out.info["max_series_terms"] = out.basis_op->max_terms;
            out.info["capped_elements"] = out.basis_op->capped;
            if (out.basis_op->capped > 0)
                rep.warnings.push_back(std::to_string(out.basis_op->capped) +
                                       " matrix-element series reached the cap before the tolerance");
            break;
        }
    }
    bool finite = true;
    for (double e : out.spectrum.levels) finite = finite && std::isfinite(e);
    add_check(rep, "levels_finite", finite ? 0.0 : 1.0, 0.0);

    // planar reference when the surface is flat and there is no field
    if (c.domain.surface.is_flat() && c.domain.contour.is_rectangle() && c.solver != config::SolverKind::analytic) {
        const auto& rc = c.domain.contour.rectangle_shape();
        const BasisIndex planar(rc.lx, rc.ly, static_cast<int>(out.spectrum.size()));
        double worst = 0.0;
        for (std::size_t i = 0; i < out.spectrum.size(); ++i)
            worst = std::max(worst, std::abs(out.spectrum.levels[i] / planar[static_cast<int>(i)].eps - 1.0));
        out.info["planar_max_relative_deviation"] = worst;
    }
    return out;
}

inline ClassicalState start_state(const config::RunConfig& c) {
    const double r = c.domain.surface.radius_of(c.start);
    const double kinetic = c.energy - c.domain.potential(r);
    if (!(kinetic > 0.0)) throw ConfigError("classical.energy is below the potential at the start point");
    ClassicalState s = state_from_cartesian(c.start, {std::cos(c.angle), std::sin(c.angle)}, 0.0, c.domain);
    const double t0 = hamiltonian(s, c.domain) - c.domain.potential(r);
    const double scale = std::sqrt(kinetic / t0);
    s.p_r *= scale;
    s.L *= scale;
    return s;
}

inline IntegratorOptions integrator(const config::RunConfig& c) {
    IntegratorOptions o;
    o.dt = c.dt;
    return o;
}

inline void run_trajectory(const config::RunConfig& c, const std::filesystem::path& dir, const std::string& tag,
                           RunReport& rep) {
    c.domain.validate();
    IntegratorOptions o = integrator(c);
    o.record_every = c.record_every;
    const CollisionRun run = run_collisions(start_state(c), c.domain, c.collisions, o);
    const std::string traj = "trajectory_" + tag + ".csv";
    {
        io::CsvWriter w(dir / traj, {"t", "x", "y", "z", "H"});
        for (const auto& s : run.trajectory) {
            const Vec2 p = position(s, c.domain);
            w.row({io::format_double(s.t), io::format_double(p.x), io::format_double(p.y),
                   io::format_double(c.domain.surface.height(s.r)), io::format_double(hamiltonian(s, c.domain))});
        }
    }
    const std::string coll = "collisions_" + tag + ".csv";
    {
        io::CsvWriter w(dir / coll, {"collision_idx", "t", "x", "y", "s", "alpha", "corner"});
        for (const auto& e : run.events)
            w.row({std::to_string(e.index), io::format_double(e.t), io::format_double(e.position.x),
                   io::format_double(e.position.y), io::format_double(e.s), io::format_double(e.alpha),
                   e.corner ? "1" : "0"});
    }
    rep.outputs.push_back(traj);
    rep.outputs.push_back(coll);
    rep.results["energy"] = run.energy_start;
    rep.results["max_relative_drift"] = run.max_relative_drift;
    rep.results["collisions"] = run.events.size();
    add_check(rep, "energy_drift", run.max_relative_drift, c.drift_tol * std::max(1.0, c.collisions / 100.0));
}

inline void run_poincare(const config::RunConfig& c, const std::filesystem::path& dir, const std::string& tag,
                         RunReport& rep) {
    const PoincareResult pr = poincare_section(c.domain, c.n_initial, c.n_collisions, c.seed, c.energy, integrator(c));
    const std::string name = "poincare_" + tag + ".csv";
    {
        io::CsvWriter w(dir / name, {"traj_id", "collision_idx", "s", "alpha"});
        for (const auto& e : pr.events)
            w.row({std::to_string(e.traj_id), std::to_string(e.collision_idx), io::format_double(e.s),
                   io::format_double(e.alpha)});
    }
    rep.outputs.push_back(name);
    for (const auto& [k, msg] : pr.failures) rep.warnings.push_back("trajectory " + std::to_string(k) + " dropped: " + msg);
    rep.results["events"] = pr.events.size();
    rep.results["failures"] = pr.failures.size();
    rep.results["max_relative_drift"] = pr.max_relative_drift;
    rep.results["cell_coverage"] = cell_coverage(pr.events, c.s_bins, c.alpha_bins);
    rep.results["coverage_bins"] = {c.s_bins, c.alpha_bins};
    add_check(rep, "energy_drift", pr.max_relative_drift, c.drift_tol * std::max(1.0, c.n_collisions / 100.0));
    add_check(rep, "surviving_trajectories", pr.failures.size() == static_cast<std::size_t>(c.n_initial) ? 1.0 : 0.0, 0.0);
}

inline void write_spectrum(const Spectrum& s, const std::filesystem::path& dir, const std::string& tag, RunReport& rep) {
    const std::string name = "spectrum_" + tag + ".csv";
    io::write_spectrum_csv(dir / name, s);
    rep.outputs.push_back(name);
}

inline void run_spectrum(const config::RunConfig& c, const std::filesystem::path& dir, const std::string& tag,
                         RunReport& rep) {
    SolvedSpectrum sol = solve_spectrum(c, false, rep);
    write_spectrum(sol.spectrum, dir, tag, rep);
    rep.results["solver"] = sol.info;
    rep.results["levels"] = sol.spectrum.size();
    rep.results["lowest"] = sol.spectrum.levels.empty() ? 0.0 : sol.spectrum.levels.front();
    rep.n_use = sol.spectrum.size();
}

inline void run_unfold_fit(const config::RunConfig& c, const std::filesystem::path& dir, const std::string& tag,
                           RunReport& rep) {
    Spectrum s;
    if (!c.input.empty()) {
        s = io::read_spectrum_csv(c.input);
        rep.results["input"] = c.input;
    } else {
        SolvedSpectrum sol = solve_spectrum(c, false, rep);
        s = std::move(sol.spectrum);
        rep.results["solver"] = sol.info;
        write_spectrum(s, dir, tag, rep);
    }
    const std::size_t trusted = trusted_prefix(s, c.trusted_tolerance, static_cast<std::size_t>(c.trusted_minimum));
    s.n_use = c.n_use > 0 ? std::min<std::size_t>(c.n_use, s.size()) : trusted;
    rep.n_use = s.n_use;
    rep.results["trusted_prefix"] = trusted;
    const SpacingSample sample = unfold(s, c.unfold);
    rep.results["unfold_coefficients"] = sample.fit_coefficients;

    const std::string sp = "spacings_" + tag + ".csv";
    {
        io::CsvWriter w(dir / sp, {"s"});
        for (double x : sample.spacings) w.row({io::format_double(x)});
    }
    const std::string hist = "histogram_" + tag + ".csv";
    {
        const Histogram h = histogram(sample.spacings);
        io::CsvWriter w(dir / hist, {"left", "right", "count", "density"});
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            w.row({io::format_double(h.edges[b]), io::format_double(h.edges[b + 1]), std::to_string(h.counts[b]),
                   io::format_double(h.density[b])});
    }
    const std::string fit = "fit_" + tag + ".csv";
    {
        io::CsvWriter w(dir / fit, {"model", "params", "ks", "chi2_per_bin"});
        nlohmann::json fits = nlohmann::json::array();
        for (SpacingModel m : {SpacingModel::poisson, SpacingModel::goe, SpacingModel::goe2}) {
            const FitResult r = evaluate_model(sample.spacings, m);
            w.row({to_string(m), "-", io::format_double(r.ks_distance), io::format_double(r.chi2_per_bin)});
            fits.push_back({{"model", to_string(m)}, {"ks", r.ks_distance}, {"chi2_per_bin", r.chi2_per_bin}});
        }
        if (sample.spacings.size() >= 300) {
            const FitResult r = fit_berry_robnik(sample.spacings);
            const std::string params = "rho1=" + io::format_double(r.rho1) + ";rho1_low=" + io::format_double(r.rho1_low) +
                                       ";rho1_high=" + io::format_double(r.rho1_high);
            w.row({to_string(r.model), params, io::format_double(r.ks_distance), io::format_double(r.chi2_per_bin)});
            fits.push_back({{"model", to_string(r.model)},
                            {"rho1", r.rho1},
                            {"rho1_low", r.rho1_low},
                            {"rho1_high", r.rho1_high},
                            {"ks", r.ks_distance},
                            {"chi2_per_bin", r.chi2_per_bin},
                            {"jittered", r.jittered}});
        } else {
            rep.warnings.push_back("fewer than 300 spacings: Berry-Robnik fit skipped");
        }
        rep.results["fits"] = fits;
    }
    rep.outputs.push_back(sp);
    rep.outputs.push_back(hist);
    rep.outputs.push_back(fit);
}

inline void run_wavefunction(const config::RunConfig& c, const std::filesystem::path& dir, const std::string& tag,
                             RunReport& rep) {
    SolvedSpectrum sol = solve_spectrum(c, true, rep);
    if (c.state >= static_cast<int>(sol.eigen.values.size()))
        throw ConfigError("solver.state " + std::to_string(c.state) + " was not computed");
    WavefunctionGrid w = sol.fdm_op ? wavefunction_on_grid(*sol.fdm_op, sol.eigen, c.state)
                                    : basis_wavefunction(*sol.basis_op, sol.eigen, c.state, c.nx, c.ny);
    w.config_hash = tag;
    double norm = 0.0;
    if (sol.fdm_op) {
        norm = surface_norm(*sol.fdm_op, w);
    } else {
        for (double v : w.values) norm += v * v * w.hx * w.hy;
    }
    add_check(rep, "wavefunction_normalization", std::abs(norm - 1.0), 1e-8);
    const std::string name = "wavefunction_" + tag + "_" + std::to_string(c.state) + ".txt";
    io::write_wavefunction(dir / name, w);
    const WavefunctionGrid back = io::read_wavefunction(dir / name);
    add_check(rep, "wavefunction_round_trip", back.values == w.values && back.energy == w.energy ? 0.0 : 1.0, 0.0);
    rep.outputs.push_back(name);
    write_spectrum(sol.spectrum, dir, tag, rep);
    rep.results["solver"] = sol.info;
    rep.results["state"] = c.state;
    rep.results["energy"] = w.energy;
    rep.results["normalization"] = w.normalization;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

inline nlohmann::json metadata_json(const config::RunConfig& c, const RunReport& rep) {
    nlohmann::json j;
    j["tool"] = "nonplanar";
    j["version"] = version_string;
    j["created"] = detail::utc_timestamp();
    j["mode"] = c.resolved.text("run.mode");
    j["config_hash"] = rep.config_hash;
    j["seed"] = c.seed;
    j["config"] = c.resolved.values();
    j["threads"] = thread_count();
    j["versions"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR)}};
    j["units"] = {{"hbar", hbar}, {"mass", mass}};
    j["tolerances"] = {{"drift_per_100_collisions", c.drift_tol},
                       {"series_tol", c.basis.tol},
                       {"trusted_tolerance", c.trusted_tolerance},
                       {"lanczos_tol", 1e-8}};
    j["n_use"] = rep.n_use;
    j["warnings"] = rep.warnings;
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& ch : rep.checks)
        checks.push_back({{"name", ch.name}, {"passed", ch.passed}, {"value", ch.value}, {"limit", ch.limit}});
    j["checks"] = checks;
    j["outputs"] = rep.outputs;
    j["results"] = rep.results;
    j["exit_code"] = rep.exit_code;
    return j;
}

/// Runs the configured mode. Errors propagate as nonplanar::Error; a failed
/// self-check leaves the artifacts in place and sets exit code 4.
inline RunReport run(const config::RunConfig& c) {
    RunReport rep;
    rep.config_hash = c.resolved.hash();
    const std::filesystem::path dir = c.output;
    std::filesystem::create_directories(dir);
    switch (c.mode) {
        case config::Mode::trajectory: detail::run_trajectory(c, dir, rep.config_hash, rep); break;
        case config::Mode::poincare: detail::run_poincare(c, dir, rep.config_hash, rep); break;
        case config::Mode::spectrum: detail::run_spectrum(c, dir, rep.config_hash, rep); break;
        case config::Mode::unfold_fit: detail::run_unfold_fit(c, dir, rep.config_hash, rep); break;
        case config::Mode::wavefunction: detail::run_wavefunction(c, dir, rep.config_hash, rep); break;
    }
    for (const auto& ch : rep.checks)
        if (!ch.passed) rep.exit_code = 4;
    const std::string meta = "metadata_" + rep.config_hash + ".json";
    rep.outputs.push_back(meta);
    io::write_json(dir / meta, metadata_json(c, rep));
    return rep;
}

}  // namespace nonplanar
