// Command-line front end. One subcommand per mode:
//
//   nonplanar spectrum --config configs/cone_circle.ini --set solver.count=500 --out out
//
// Exit status: 0 ok, 2 config error, 3 numerical-domain error, 4 tolerance
// failure (including failed self-checks). Failures also write error.json.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "nonplanar/nonplanar.hpp"

namespace {

struct Options {
    std::string config;
    std::vector<std::string> set;
    std::string out;
    long long seed = -1;
};

void write_error(const std::string& out_dir, const nonplanar::Error& e) {
    try {
        nonplanar::io::write_json(std::filesystem::path(out_dir.empty() ? "." : out_dir) / "error.json",
                                  nonplanar::io::error_record(e));
    } catch (const std::exception& w) {
        std::cerr << "could not write error.json: " << w.what() << "\n";
    }
}

int execute(const std::string& mode, const Options& opt) {
    using namespace nonplanar;
    std::string out_dir = opt.out;
    try {
        config::Sections file;
        if (!opt.config.empty()) file = config::read_ini(opt.config);
        std::vector<std::string> overrides = opt.set;
        overrides.push_back("run.mode=" + mode);
        if (!opt.out.empty()) overrides.push_back("run.output=" + opt.out);
        if (opt.seed >= 0) overrides.push_back("run.seed=" + std::to_string(opt.seed));
        const config::Resolved resolved = config::resolve(file, overrides);
        out_dir = resolved.text("run.output");
        const config::RunConfig cfg = config::build(resolved);
        const RunReport rep = run(cfg);
        std::cout << "config " << rep.config_hash << "\n";
        for (const auto& f : rep.outputs) std::cout << "wrote " << (std::filesystem::path(out_dir) / f).string() << "\n";
        if (rep.results.contains("solver") && rep.results["solver"].contains("planar_max_relative_deviation"))
            std::cout << "planar max relative deviation "
                      << rep.results["solver"]["planar_max_relative_deviation"].get<double>() << "\n";
        for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
        for (const auto& ch : rep.checks)
            if (!ch.passed) std::cerr << "check failed: " << ch.name << " = " << ch.value << " > " << ch.limit << "\n";
        if (rep.exit_code != 0)
            write_error(out_dir, ToleranceError("self-check failed; see metadata_" + rep.config_hash + ".json"));
        return rep.exit_code;
    } catch (const Error& e) {
        std::cerr << e.kind_name() << " error: " << e.what() << "\n";
        write_error(out_dir, e);
        return e.exit_code();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum and classical billiards on non-planar surfaces"};
    app.require_subcommand(1);
    Options opt;
    std::string chosen;
    const std::vector<std::pair<std::string, std::string>> modes = {
        {"trajectory", "integrate one orbit and record its collisions"},
        {"poincare", "collision map (s, alpha) of random orbits"},
        {"spectrum", "lowest eigenvalues (analytic, fdm or basis solver)"},
        {"unfold-fit", "unfold a spectrum and fit spacing distributions"},
        {"wavefunction", "export one eigenstate on a grid"},
    };
    for (const auto& [name, help] : modes) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", opt.config, "config file (sections [run] [domain] [solver] [classical] [statistics])");
        sub->add_option("-s,--set", opt.set, "override, e.g. --set solver.count=200 (repeatable)");
        sub->add_option("-o,--out", opt.out, "output directory (run.output)");
        sub->add_option("--seed", opt.seed, "random seed (run.seed)");
        sub->callback([&chosen, name = name] { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return execute(chosen, opt);
}
