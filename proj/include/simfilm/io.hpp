#pragma once

#include "simfilm/core.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace simfilm {

/// Raised when an output file cannot be written.
class OutputError : public Error {
public:
    explicit OutputError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

/// %.17g.
std::string format_number(double v);

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> row);
};

void write_csv(const std::filesystem::path& path, const Table& table);
/// Two whitespace-separated columns, one point per line.
void write_plotdata(const std::filesystem::path& path, const std::vector<double>& x, const std::vector<double>& y);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// 64-bit FNV-1a of the compact dump, as 16 hex digits.
std::string config_digest(const nlohmann::json& config);

struct InvariantCheck {
    std::string name;
    bool pass = false;
    double value = 0.0;
};

struct RunManifest {
    std::string subcommand;
    nlohmann::json config;
    std::string config_digest;
    std::vector<std::string> outputs;
    std::vector<InvariantCheck> invariant_checks;
    nlohmann::json results = nlohmann::json::object();

    bool all_pass() const;
    nlohmann::json to_json() const;
};

}  // namespace simfilm
