#include "renv/io.hpp"

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "renv/errors.hpp"

namespace renv {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

void export_path(const EnvironmentPath& path, const std::string& file) {
    std::ofstream out(file);
    if (!out) throw ConfigError("cannot open " + file + " for writing");
    out << "# environment path v1\n";
    out << "seed\t" << path.seed() << "\n";
    out << "kind\t" << to_string(path.kind()) << "\n";
    out << "half_width\t" << format_double(path.half_width()) << "\n";
    out << "base_level\t" << path.base_level() << "\n";
    out << "slope\t" << format_double(path.slope()) << "\n";
    out << "values\n";
    const auto pos = path.base_values_pos();
    const auto neg = path.base_values_neg();
    const double h = std::ldexp(1.0, -path.base_level());
    for (std::size_t i = neg.size(); i-- > 1;)
        out << format_double(-static_cast<double>(i) * h) << "\t" << format_double(neg[i]) << "\n";
    for (std::size_t i = 0; i < pos.size(); ++i)
        out << format_double(static_cast<double>(i) * h) << "\t" << format_double(pos[i]) << "\n";
}

std::shared_ptr<EnvironmentPath> import_path(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open " + file);
    std::string line;
    std::uint64_t seed = 0;
    std::string kind_str;
    double half_width = 0.0, slope = 0.0;
    int base_level = -1;
    bool in_values = false;
    std::vector<std::pair<double, double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!in_values) {
            std::istringstream ss(line);
            std::string key;
            ss >> key;
            if (key == "seed") ss >> seed;
            else if (key == "kind") ss >> kind_str;
            else if (key == "half_width") ss >> half_width;
            else if (key == "base_level") ss >> base_level;
            else if (key == "slope") ss >> slope;
            else if (key == "values") in_values = true;
            else throw ConfigError("path import: unknown header key " + key);
        } else {
            std::istringstream ss(line);
            double x = 0, v = 0;
            if (!(ss >> x >> v)) throw ConfigError("path import: bad value line");
            rows.emplace_back(x, v);
        }
    }
    if (base_level < 0 || kind_str.empty()) throw ConfigError("path import: incomplete header");
    const PathKind kind = path_kind_from_string(kind_str);
    if (kind != PathKind::wiener)
        return kind == PathKind::deterministic_sqrt
                   ? EnvironmentPath::deterministic_sqrt(half_width, base_level)
               : kind == PathKind::zero
                   ? EnvironmentPath::zero(half_width, base_level)
                   : EnvironmentPath::synthetic_linear(slope, half_width, base_level);

    const double h = std::ldexp(1.0, -base_level);
    std::vector<double> pos, neg;
    for (const auto& [x, v] : rows) {
        const auto idx = std::llround(x / h);
        if (idx >= 0) {
            const auto need = static_cast<std::size_t>(idx) + 1;
            if (pos.size() < need) pos.resize(need);
            pos[static_cast<std::size_t>(idx)] = v;
        } else {
            const auto need = static_cast<std::size_t>(-idx) + 1;
            if (neg.size() < need) neg.resize(need);
            neg[static_cast<std::size_t>(-idx)] = v;
        }
    }
    return EnvironmentPath::from_values(kind, seed, half_width, base_level, pos, neg, slope);
}

DsvWriter::DsvWriter(const std::string& file, const std::string& schema,
                     std::uint64_t config_hash, bool deterministic)
    : out_(file) {
    if (!out_) throw ConfigError("cannot open " + file + " for writing");
    if (!deterministic) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        out_ << "# generated " << now << "\n";
    }
    char hash[24];
    std::snprintf(hash, sizeof(hash), "%016" PRIx64, config_hash);
    out_ << "# config_hash " << hash << "\n";
    out_ << schema << "\n";
}

void DsvWriter::comment(const std::string& text) { out_ << "# " << text << "\n"; }

void DsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
        out_ << cells[i] << (i + 1 == cells.size() ? "\n" : ",");
}

void DsvWriter::row_values(const std::vector<double>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
        out_ << format_double(cells[i]) << (i + 1 == cells.size() ? "\n" : ",");
}

}  // namespace renv
