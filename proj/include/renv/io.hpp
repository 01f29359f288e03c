#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "renv/environment.hpp"

namespace renv {

// Structured text: header (seed, kind, half_width, base_level), then
// "abscissa<TAB>value" lines over the base grid.  Values round-trip
// bit-exactly at the stored level.
void export_path(const EnvironmentPath& path, const std::string& file);
std::shared_ptr<EnvironmentPath> import_path(const std::string& file);

std::uint64_t fnv1a(const std::string& data);

std::string format_double(double v);  // shortest round-trip decimal

// Delimiter-separated output with a one-line schema header.  The timestamp
// comment is suppressed in deterministic mode so reruns are byte-identical.
class DsvWriter {
public:
    DsvWriter(const std::string& file, const std::string& schema, std::uint64_t config_hash,
              bool deterministic);

    void comment(const std::string& text);
    void row(const std::vector<std::string>& cells);
    void row_values(const std::vector<double>& cells);

private:
    std::ofstream out_;
};

}  // namespace renv
