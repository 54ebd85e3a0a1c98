#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "simfilm/io.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

using namespace simfilm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch() {
    const fs::path d = fs::temp_directory_path() / "simfilm_io_test";
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("numbers round-trip at 17 digits") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(-2.0) == "-2");
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        CHECK(std::stod(format_number(v)) == v);
    }
}

TEST_CASE("csv and plotdata layout") {
    Table t;
    t.columns = {"y", "F"};
    t.add({0.0, 0.5});
    t.add({1.5, -0.25});
    CHECK_THROWS_AS(t.add({1.0}), Error);
    const fs::path a = scratch() / "a.csv", b = scratch() / "b.csv";
    write_csv(a, t);
    write_csv(b, t);
    CHECK(slurp(a) == "y,F\n0,0.5\n1.5,-0.25\n");
    CHECK(slurp(a) == slurp(b));
    const fs::path p = scratch() / "p.dat";
    write_plotdata(p, {1.0, 2.0}, {3.0, 4.5});
    CHECK(slurp(p) == "1 3\n2 4.5\n");
    CHECK_THROWS_AS(write_plotdata(p, {1.0}, {}), Error);
    CHECK_THROWS_AS(write_csv(scratch() / "missing" / "x.csv", t), OutputError);
}

TEST_CASE("config digest") {
    const nlohmann::json a{{"dim", 1}, {"order", 2}, {"tol", 1e-8}};
    const nlohmann::json b = nlohmann::json::parse(R"({"tol": 1e-8, "order": 2, "dim": 1})");
    CHECK(config_digest(a) == config_digest(b));
    CHECK(config_digest(a).size() == 16);
    nlohmann::json c = a;
    c["tol"] = 1e-7;
    CHECK(config_digest(a) != config_digest(c));
    CHECK(config_digest(nlohmann::json::object()) == "9bf65e00c699fdaf");
}

TEST_CASE("manifest") {
    RunManifest m;
    m.subcommand = "kernel";
    m.config = {{"dim", 1}};
    m.config_digest = config_digest(m.config);
    m.outputs = {"F.csv"};
    m.invariant_checks = {{"a", true, 1.0}, {"b", true, 2.0}};
    CHECK(m.all_pass());
    const nlohmann::json j = m.to_json();
    for (const char* k : {"subcommand", "config", "config_digest", "outputs", "invariant_checks", "results"})
        CHECK(j.contains(k));
    CHECK(j["invariant_checks"][1]["value"] == 2.0);
    m.invariant_checks.push_back({"c", false, 0.0});
    CHECK_FALSE(m.all_pass());
}
