#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fockchaos/fock.hpp"

namespace fockchaos {

constexpr int config_schema_version = 1;
const char *library_version();

// Parsed configuration; the canonical text is the key-sorted JSON that the hash covers.
struct ExperimentConfig {
    std::string experiment;
    LatticeParams lattice;
    std::uint64_t seed = 1;
    std::string output_dir = ".";
    std::string canonical;
};

struct ConfigIssue {
    std::string path;    // e.g. "lattice.U"
    std::string message;
    bool capacity = false;
};

// Throws ConfigError (with the field path in the message) or CapacityError.
ExperimentConfig parse_config(const std::string &json_text);
// Never throws on bad input; returns every schema and sanity problem found.
std::vector<ConfigIssue> validate_config(const std::string &json_text);

using Cell = std::variant<double, long long, std::string>;

struct ResultTable {
    std::string name; // file stem
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    void add(std::vector<Cell> row);
};

struct RunOutput {
    std::string experiment;
    std::vector<ResultTable> tables;
    std::vector<std::string> notes;
    std::uint64_t config_hash = 0;
    std::vector<std::uint64_t> seeds;
    double wall_time_s = 0;
};

std::uint64_t fnv1a64(const std::string &s);

// Overrides: seed replaces the config seed when set.
RunOutput run_experiment(const std::string &json_text, std::optional<std::uint64_t> seed = std::nullopt);

std::string format_csv(const ResultTable &t);
std::string metadata_json(const RunOutput &r);
// Writes <dir>/<table>.csv for every table and <dir>/<experiment>.meta.json; returns the paths.
std::vector<std::string> write_outputs(const RunOutput &r, const std::string &dir);

} // namespace fockchaos
