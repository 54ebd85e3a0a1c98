#include "simfilm/io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>

namespace simfilm {

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void Table::add(std::vector<double> row) {
    if (row.size() != columns.size()) config_error("table row width differs from the header");
    rows.push_back(std::move(row));
}

namespace {

std::ofstream open(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw OutputError("cannot write " + path.string());
    return os;
}

void close(std::ofstream& os, const std::filesystem::path& path) {
    os.close();
    if (!os) throw OutputError("failed writing " + path.string());
}

}  // namespace

void write_csv(const std::filesystem::path& path, const Table& table) {
    std::ofstream os = open(path);
    for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << table.columns[i];
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_number(row[i]);
        os << '\n';
    }
    close(os, path);
}

void write_plotdata(const std::filesystem::path& path, const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) config_error("plot series of unequal length");
    std::ofstream os = open(path);
    for (std::size_t i = 0; i < x.size(); ++i) os << format_number(x[i]) << ' ' << format_number(y[i]) << '\n';
    close(os, path);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    std::ofstream os = open(path);
    os << doc.dump(2) << '\n';
    close(os, path);
}

std::string config_digest(const nlohmann::json& config) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

bool RunManifest::all_pass() const {
    for (const auto& c : invariant_checks)
        if (!c.pass) return false;
    return true;
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : invariant_checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}});
    return {{"subcommand", subcommand}, {"config", config},   {"config_digest", config_digest},
            {"outputs", outputs},       {"invariant_checks", checks}, {"results", results}};
}

}  // namespace simfilm
