#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path& dir() {
    static const fs::path d = [] {
        const fs::path p = fs::temp_directory_path() / "simfilm_cli_test";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return d;
}

int sh(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " SIMFILM_CLI " " + args + " > " + (dir() / "stdout.txt").string() + " 2>&1";
    const int s = std::system(cmd.c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

nlohmann::json manifest(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("kernel table with manifest") {
    const fs::path f = dir() / "F.csv";
    CHECK(sh("kernel --dim 1 --order 2 --out " + f.string()) == 0);
    CHECK(slurp(f).rfind("y,F\n", 0) == 0);
    const auto m = manifest(dir() / "F.manifest.json");
    CHECK(m["subcommand"] == "kernel");
    CHECK(m["invariant_checks"][0]["name"] == "integral_F_equals_1");
    CHECK(m["invariant_checks"][0]["pass"] == true);
    for (const auto& o : m["outputs"]) CHECK(fs::exists(o.get<std::string>()));
}

TEST_CASE("identical configs give identical bytes") {
    fs::create_directories(dir() / "a");
    fs::create_directories(dir() / "b");
    CHECK(sh("kernel --derivs 2 --grid-L 30 --grid-cells 300 --out " + (dir() / "a").string()) == 0);
    CHECK(sh("kernel --derivs 2 --grid-L 30 --grid-cells 300 --out " + (dir() / "b").string()) == 0);
    CHECK(slurp(dir() / "a" / "kernel.csv") == slurp(dir() / "b" / "kernel.csv"));
    const auto ma = manifest(dir() / "a" / "kernel.manifest.json");
    const auto mb = manifest(dir() / "b" / "kernel.manifest.json");
    CHECK(ma["config_digest"] == mb["config_digest"]);
    CHECK(ma["config"]["grid_cells"] == 300);
    CHECK(slurp(dir() / "a" / "kernel.csv").rfind("y,F,D1F,D2F\n", 0) == 0);
}

TEST_CASE("config precedence") {
    const fs::path cfg = dir() / "cfg.json";
    std::ofstream(cfg) << R"({"kernel": {"order": 1, "tol": 1e-7}})";
    fs::create_directories(dir() / "c");
    CHECK(sh("kernel --config " + cfg.string() + " --tol 1e-9 --out " + (dir() / "c").string()) == 0);
    const auto m = manifest(dir() / "c" / "kernel.manifest.json");
    CHECK(m["config"]["order"] == 1);
    CHECK(m["config"]["tol"] == 1e-9);
}

TEST_CASE("branch level 0 report") {
    fs::create_directories(dir() / "br");
    CHECK(sh("branch --level 0 --dim 1 --out " + (dir() / "br").string()) == 0);
    CHECK(slurp(dir() / "stdout.txt").find("oracle -N^2/16") != std::string::npos);
    const auto r = manifest(dir() / "br" / "branch.json");
    for (const char* k : {"level", "coefficients", "roots", "residuals", "flags"}) CHECK(r.contains(k));
    CHECK(std::abs(r["coefficients"]["mu_1_0"].get<double>() + 0.0625) < 1e-3);
}

TEST_CASE("homotopy outputs and SIMFILM_OUT") {
    fs::create_directories(dir() / "env");
    CHECK(sh("homotopy --t-final 0.01 --format plotdata", "SIMFILM_OUT=" + (dir() / "env").string()) == 0);
    CHECK(fs::exists(dir() / "env" / "diagnostics_energy.dat"));
    CHECK(fs::exists(dir() / "env" / "homotopy.manifest.json"));
    const auto m = manifest(dir() / "env" / "homotopy.manifest.json");
    CHECK(m["results"]["boundary"].get<std::string>().find("periodic") != std::string::npos);
}

TEST_CASE("exit codes") {
    CHECK(sh("") == 1);
    CHECK(sh("nonsense") == 1);
    CHECK(sh("kernel --out " + (dir() / "no" / "such").string()) == 5);
    const fs::path bad = dir() / "bad.json";
    std::ofstream(bad) << "{dim";
    CHECK(sh("kernel --config " + bad.string() + " --out " + dir().string()) == 2);
    CHECK(sh("kernel --dim 3 --out " + dir().string()) == 2);
    CHECK(sh("kernel --tol -1 --out " + dir().string()) == 2);
    CHECK(sh("kernel --grid-cells abc --out " + dir().string()) == 2);
    CHECK(sh("branch --level 1 --dim 1 --out " + dir().string()) == 2);
    // A run whose energy check fails exits with the invariant code.
    CHECK(sh("homotopy --adaptive false --dt-initial 1e-2 --dt-max 1e-2 --t-final 0.5 --out " + dir().string()) == 4);
    CHECK(sh("--help") == 0);
}
