#pragma once

// Output formats: CSV with a header row, numbers at 17 significant digits
// through std::to_chars (locale independent), the wavefunction text grid,
// and JSON records.

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nonplanar/core.hpp"
#include "nonplanar/fdm.hpp"
#include "nonplanar/spectra.hpp"

namespace nonplanar::io {

inline std::string format_double(double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("malformed number '" + std::string(s) + "' in " + what);
    return v;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DomainError("cannot write " + path.string());
    return f;
}

/// Rows are written as given; cells that are numbers should be formatted
/// with format_double by the caller.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(open_output(path)) {
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s) {
    CsvWriter w(path, {"idx", "E", "provenance"});
    for (std::size_t i = 0; i < s.levels.size(); ++i)
        w.row({std::to_string(i), format_double(s.levels[i]), i < s.provenance.size() ? s.provenance[i] : s.source});
}

/// Reads an idx,E[,provenance] CSV written by write_spectrum_csv.
inline Spectrum read_spectrum_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open spectrum file " + path.string());
    std::string line;
    if (!std::getline(f, line) || line.rfind("idx,E", 0) != 0)
        throw ConfigError(path.string() + ": expected header idx,E,provenance");
    std::vector<double> levels;
    std::vector<std::string> tags;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        if (c1 == std::string::npos) throw ConfigError(path.string() + ": malformed row '" + line + "'");
        const auto c2 = line.find(',', c1 + 1);
        const std::string e = line.substr(c1 + 1, c2 == std::string::npos ? std::string::npos : c2 - c1 - 1);
        levels.push_back(parse_double(e, path.string()));
        tags.push_back(c2 == std::string::npos ? "" : line.substr(c2 + 1));
    }
    if (levels.empty()) throw ConfigError(path.string() + " holds no levels");
    return make_spectrum(std::move(levels), "file", std::move(tags));
}

// ---------------------------------------------------------------------------
// Wavefunction grid: "key value" header lines, a "data" line, then one grid
// row per line (x fastest), values separated by single spaces.

inline void write_wavefunction(std::ostream& out, const WavefunctionGrid& w) {
    out << "nonplanar-wavefunction 1\n";
    out << "nx " << w.nx << "\n";
    out << "ny " << w.ny << "\n";
    out << "hx " << format_double(w.hx) << "\n";
    out << "hy " << format_double(w.hy) << "\n";
    out << "origin_x " << format_double(w.origin.x) << "\n";
    out << "origin_y " << format_double(w.origin.y) << "\n";
    out << "energy " << format_double(w.energy) << "\n";
    out << "index " << w.index << "\n";
    out << "normalization " << w.normalization << "\n";
    out << "config_hash " << (w.config_hash.empty() ? "-" : w.config_hash) << "\n";
    out << "data\n";
    for (int j = 0; j < w.ny; ++j) {
        for (int i = 0; i < w.nx; ++i) {
            if (i) out << ' ';
            out << format_double(w.values[static_cast<std::size_t>(j) * w.nx + i]);
        }
        out << '\n';
    }
}

inline void write_wavefunction(const std::filesystem::path& path, const WavefunctionGrid& w) {
    std::ofstream f = open_output(path);
    write_wavefunction(f, w);
}

inline WavefunctionGrid read_wavefunction(std::istream& in) {
    WavefunctionGrid w;
    std::string line;
    if (!std::getline(in, line) || line != "nonplanar-wavefunction 1") throw ConfigError("not a wavefunction grid file");
    while (std::getline(in, line) && line != "data") {
        const auto sp = line.find(' ');
        if (sp == std::string::npos) throw ConfigError("malformed wavefunction header line '" + line + "'");
        const std::string key = line.substr(0, sp), value = line.substr(sp + 1);
        if (key == "nx") w.nx = std::stoi(value);
        else if (key == "ny") w.ny = std::stoi(value);
        else if (key == "hx") w.hx = parse_double(value, "hx");
        else if (key == "hy") w.hy = parse_double(value, "hy");
        else if (key == "origin_x") w.origin.x = parse_double(value, "origin_x");
        else if (key == "origin_y") w.origin.y = parse_double(value, "origin_y");
        else if (key == "energy") w.energy = parse_double(value, "energy");
        else if (key == "index") w.index = std::stoi(value);
        else if (key == "normalization") w.normalization = value;
        else if (key == "config_hash") w.config_hash = value == "-" ? "" : value;
        else throw ConfigError("unknown wavefunction header key '" + key + "'");
    }
    if (w.nx < 1 || w.ny < 1) throw ConfigError("wavefunction grid dimensions missing");
    w.values.reserve(static_cast<std::size_t>(w.nx) * w.ny);
    for (int j = 0; j < w.ny; ++j) {
        if (!std::getline(in, line)) throw ConfigError("wavefunction grid ends after " + std::to_string(j) + " rows");
        std::istringstream row(line);
        std::string cell;
        int count = 0;
        while (row >> cell) {
            w.values.push_back(parse_double(cell, "wavefunction row " + std::to_string(j)));
            ++count;
        }
        if (count != w.nx) throw ConfigError("wavefunction row " + std::to_string(j) + " has " + std::to_string(count) + " values");
    }
    return w;
}

inline WavefunctionGrid read_wavefunction(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open " + path.string());
    return read_wavefunction(f);
}

// ---------------------------------------------------------------------------
// JSON

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream f = open_output(path);
    f << j.dump(2) << "\n";
}

inline nlohmann::json error_record(const Error& e) {
    return {{"error", e.kind_name()}, {"exit_code", e.exit_code()}, {"message", e.what()}};
}

}  // namespace nonplanar::io
