#include "simfilm/acceptance.hpp"
#include "simfilm/branching.hpp"
#include "simfilm/homotopy.hpp"
#include "simfilm/io.hpp"
#include "simfilm/profile.hpp"
#include "simfilm/semigroup.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <sstream>

using nlohmann::json;
namespace fs = std::filesystem;
using namespace simfilm;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kNumerical = 3, kInvariant = 4, kOutput = 5 };

/// Flags bound to config keys; values stay strings until merged over the defaults.
struct Command {
    Command(std::string n, json d) : name(std::move(n)), defaults(std::move(d)) {}

    std::string name;
    json defaults;
    CLI::App* app = nullptr;
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> opts;
    std::string config_path, out, format = "csv";
    int jobs = 1;
};

struct Output {
    fs::path dir;
    std::string primary;
    std::string format;
    std::vector<std::string> written;

    fs::path file(const std::string& stem, const std::string& ext) {
        const fs::path p = dir / (primary.empty() ? stem + ext : primary);
        primary.clear();
        written.push_back(p.string());
        return p;
    }

    /// Table in the selected format; plotdata writes one file per column after the first.
    void table(const std::string& stem, const Table& t) {
        if (format == "csv") {
            write_csv(file(stem, ".csv"), t);
        } else if (format == "json") {
            write_json(file(stem, ".json"), json{{"columns", t.columns}, {"rows", t.rows}});
        } else {
            std::vector<double> x;
            for (const auto& r : t.rows) x.push_back(r[0]);
            for (std::size_t c = 1; c < t.columns.size(); ++c) {
                std::vector<double> y;
                for (const auto& r : t.rows) y.push_back(r[c]);
                write_plotdata(file(stem + "_" + t.columns[c], ".dat"), x, y);
            }
        }
    }
};

json coerce(const std::string& key, const json& like, const std::string& text) {
    try {
        std::size_t used = 0;
        if (like.is_boolean()) {
            if (text == "true" || text == "1") return true;
            if (text == "false" || text == "0") return false;
            config_error("--" + key + " expects true or false");
        }
        if (like.is_number_integer()) {
            const long v = std::stol(text, &used);
            if (used != text.size()) config_error("--" + key + " expects an integer");
            return v;
        }
        if (like.is_number()) {
            const double v = std::stod(text, &used);
            if (used != text.size()) config_error("--" + key + " expects a number");
            return v;
        }
        if (like.is_array()) {
            json a = json::array();
            std::stringstream ss(text);
            std::string item;
            while (std::getline(ss, item, ',')) a.push_back(coerce(key, like.empty() ? json(0.0) : like[0], item));
            return a;
        }
        return text;
    } catch (const std::invalid_argument&) {
        config_error("--" + key + ": cannot parse '" + text + "'");
    } catch (const std::out_of_range&) {
        config_error("--" + key + ": value out of range");
    }
}

bool same_kind(const json& a, const json& b) {
    if (a.is_number() && b.is_number()) return !a.is_number_integer() || b.is_number_integer();
    return a.type() == b.type();
}

/// Defaults, then the JSON file (flat or under the subcommand name), then flags.
json effective_config(const Command& c) {
    json cfg = c.defaults;
    if (!c.config_path.empty()) {
        std::ifstream is(c.config_path);
        if (!is) config_error("cannot read config file " + c.config_path);
        json file;
        try {
            file = json::parse(is);
        } catch (const json::parse_error& e) {
            config_error(std::string("malformed config: ") + e.what());
        }
        if (!file.is_object()) config_error("config file must hold a JSON object");
        if (file.contains(c.name) && file[c.name].is_object()) file = file[c.name];
        for (const auto& [k, v] : file.items()) {
            if (!cfg.contains(k)) config_error("unknown config key '" + k + "'");
            if (!same_kind(cfg[k], v)) config_error("config key '" + k + "' has the wrong type");
            cfg[k] = v;
        }
    }
    for (const auto& [k, v] : c.raw)
        if (c.opts.at(k)->count() > 0) cfg[k] = coerce(k, c.defaults[k], v);
    if (cfg["tol"].get<double>() <= 0) config_error("--tol must be positive");
    if (cfg["grid_L"].get<double>() < 0) config_error("--grid-L must be positive");
    if (cfg["grid_cells"].get<long>() < 0) config_error("--grid-cells must be positive");
    return cfg;
}

std::string flag_name(const std::string& key) {
    std::string s = key;
    for (char& ch : s)
        if (ch == '_') ch = '-';
    return s;
}

void bind(Command& c) {
    c.defaults["tol"] = c.defaults.value("tol", 1e-6);
    c.defaults["grid_L"] = 0.0;
    c.defaults["grid_cells"] = 0L;
    for (const auto& [k, v] : c.defaults.items()) {
        std::string help = "default " + v.dump();
        if (k == "grid_L" || k == "grid_cells") help = "0 selects the module grid";
        c.opts[k] = c.app->add_option("--" + flag_name(k), c.raw[k], help);
    }
    c.app->add_option("--config", c.config_path, "JSON config file");
    c.app->add_option("--out", c.out, "output directory or primary file (default $SIMFILM_OUT or .)");
    c.app->add_option("--format", c.format, "csv, json or plotdata")->check(CLI::IsMember({"csv", "json", "plotdata"}));
    c.app->add_option("--jobs", c.jobs, "parallel sweeps where supported")->check(CLI::PositiveNumber);
}

double num(const json& cfg, const char* k) { return cfg[k].get<double>(); }
long count(const json& cfg, const char* k) { return cfg[k].get<long>(); }

int dim_of(const json& cfg) {
    const long d = count(cfg, "dim");
    if (d != 1 && d != 2) config_error("--dim must be 1 or 2");
    return static_cast<int>(d);
}

/// Grid override: both zero keeps `fallback`, otherwise missing parts come from it.
GridSpec grid_of(const json& cfg, const GridSpec& fallback) {
    const double L = num(cfg, "grid_L") > 0 ? num(cfg, "grid_L") : fallback.half_width;
    const long cells = count(cfg, "grid_cells") > 0 ? count(cfg, "grid_cells") : fallback.cells();
    if (cells < 8) config_error("--grid-cells must be at least 8");
    switch (fallback.kind) {
        case GridKind::Tensor2D: return GridSpec::tensor(L, cells);
        case GridKind::Radial: return GridSpec::radial(L, cells);
        default: return GridSpec::uniform(L, cells);
    }
}

std::vector<double> list(const json& cfg, const char* k) { return cfg[k].get<std::vector<double>>(); }

RunManifest kernel_cmd(const json& cfg, Output& out) {
    const int dim = dim_of(cfg);
    const long order = count(cfg, "order");
    if (order < 1 || order > 2) config_error("--order must be 1 or 2");
    const long derivs = count(cfg, "derivs");
    if (derivs < 0 || derivs > 8) config_error("--derivs must lie in [0, 8]");
    if (dim == 2 && derivs > 0) config_error("derivative columns are only written in one dimension");
    const KernelModel m = build_kernel(dim, static_cast<int>(order), std::max<int>(4, static_cast<int>(derivs) + 4));
    const GridSpec g = grid_of(cfg, dim == 1 ? GridSpec::uniform(30.0, 600) : GridSpec::tensor(30.0, 300));
    const Field F = eval_kernel(m, g);
    const GridSpec near = dim == 1 ? GridSpec::uniform(10.0, 400) : GridSpec::tensor(10.0, 100);
    const double mass = integrate(F);
    const double residual = apply_B(m, eval_kernel(m, near)).values.abs().maxCoeff();

    Table t;
    if (dim == 1) {
        t.columns = {"y", "F"};
        std::vector<Field> d;
        for (long p = 1; p <= derivs; ++p) {
            t.columns.push_back("D" + std::to_string(p) + "F");
            d.push_back(eval_derivative(m, MultiIndex{static_cast<int>(p)}, g));
        }
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            std::vector<double> row{g.axis(i), F.values[i]};
            for (const Field& f : d) row.push_back(f.values[i]);
            t.add(row);
        }
    } else {
        t.columns = {"y1", "y2", "F"};
        for (Eigen::Index p = 0; p < g.size(); ++p) {
            const auto y = g.point(p);
            t.add({y[0], y[1], F.values[p]});
        }
    }
    out.table("kernel", t);

    RunManifest r;
    r.invariant_checks.push_back({"integral_F_equals_1", std::abs(mass - 1.0) < num(cfg, "tol"), mass});
    r.invariant_checks.push_back({"B_F_residual_near_zero", residual < 1e-6, residual});
    r.results["integral"] = mass;
    r.results["B_residual_sup"] = residual;
    if (dim == 1 && order == 2) {
        const EnvelopeReport e = check_decay_envelope(F);
        r.results["envelope"] = {{"fitted_d", e.fitted_d},         {"fitted_D", e.fitted_D},
                                 {"fit_rms", e.fit_rms},           {"alternative_rms", e.alternative_rms},
                                 {"law_mismatch", e.law_mismatch}, {"extrema_used", e.extrema_used}};
    }
    std::printf("integral F = %.17g, sup |B F| on |y| <= 10 = %.3e\n", mass, residual);
    return r;
}

RunManifest eigen_cmd(const json& cfg, Output& out) {
    const int dim = dim_of(cfg);
    const long K = count(cfg, "K");
    if (K < 0 || K > 6) config_error("--K must lie in [0, 6]");
    const KernelModel m = dim == 1 ? build_kernel(1, static_cast<int>(count(cfg, "order")), static_cast<int>(K) + 6)
                                   : build_kernel(2, static_cast<int>(count(cfg, "order")), static_cast<int>(K) + 4,
                                                  {.radial_extent = 45.0});
    const GridSpec g = grid_of(cfg, dim == 1 ? default_gram_grid(1) : GridSpec::tensor(30.0, 300));
    const EigenPairSet s = build_eigenpairs(m, static_cast<int>(K), g);
    const Eigen::MatrixXd G = gram_matrix(s);
    const double err = (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();

    Table gram;
    gram.columns = {"row"};
    for (const auto& b : s.indices) gram.columns.push_back("g" + b.str());
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
        std::vector<double> row{static_cast<double>(i)};
        for (Eigen::Index j = 0; j < G.cols(); ++j) row.push_back(G(i, j));
        gram.add(row);
    }
    out.table("gram", gram);
    if (dim == 1) {
        Table eig;
        eig.columns = {"y"};
        for (const auto& b : s.indices) eig.columns.push_back("psi" + b.str());
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            std::vector<double> row{g.axis(i)};
            for (const Field& f : s.eigenfunctions) row.push_back(f.values[i]);
            eig.add(row);
        }
        out.table("eigenfunctions", eig);
    }

    RunManifest r;
    r.invariant_checks.push_back({"gram_identity", err < num(cfg, "tol"), err});
    json ev = json::array();
    for (std::size_t i = 0; i < s.indices.size(); ++i)
        ev.push_back({{"beta", s.indices[i].str()}, {"lambda", s.eigenvalues[i].str()}});
    r.results["eigenvalues"] = ev;
    r.results["gram_error"] = err;
    std::printf("max |G - I| = %.3e over %zu pairs\n", err, s.indices.size());
    return r;
}

RunManifest evolve_cmd(const json& cfg, Output& out) {
    const long K = count(cfg, "K");
    if (K < 0 || K > 10) config_error("--K must lie in [0, 10]");
    const KernelModel m = build_kernel(1, 2, 10);
    const EigenPairSet pairs = build_eigenpairs(m, static_cast<int>(K), grid_of(cfg, default_gram_grid(1)));
    const Field u0 = bump(default_data_grid(1));
    Table t;
    t.columns = {"tau", "l2_error", "linf_error"};
    RunManifest r;
    double worst = 0.0, mass_gap = 0.0;
    for (double tau : list(cfg, "taus")) {
        if (!(tau >= 0)) config_error("--taus must be non-negative");
        const Field e = evolve_expansion(pairs, u0, tau, static_cast<int>(K));
        const Field c = evolve_convolution(m, u0, tau, pairs.grid);
        const EvolutionComparison cmp = compare(e, c, tau, static_cast<int>(K));
        t.add({tau, cmp.l2_error, cmp.linf_error});
        worst = std::max(worst, cmp.l2_error);
        mass_gap = std::max(mass_gap, std::abs(integrate(c) - 1.0));
    }
    out.table("evolve", t);
    r.invariant_checks.push_back({"expansion_matches_convolution", worst < num(cfg, "tol"), worst});
    r.invariant_checks.push_back({"convolution_mass", mass_gap < 1e-8, mass_gap});
    std::printf("max L2 gap between expansion and convolution = %.3e\n", worst);
    return r;
}

json solution_json(const BranchSolution& s) {
    json c = json::object();
    for (const auto& [b, v] : s.coefficients) c[b.str()] = v;
    return {{"coefficients", c}, {"mu_first", s.mu_first}, {"residual", s.residual}, {"note", s.note}};
}

RunManifest branch_cmd(const json& cfg, Output& out) {
    const int dim = dim_of(cfg);
    const long level = count(cfg, "level");
    if (level < 0 || level > 2) config_error("--level must be 0, 1 or 2");
    if (level > 0 && dim != 2) config_error("levels 1 and 2 are two-dimensional; pass --dim 2");
    SolveOptions opt;
    opt.tolerance = num(cfg, "tol");
    opt.lattice = static_cast<int>(count(cfg, "lattice"));
    opt.triple_lattice = static_cast<int>(count(cfg, "triple_lattice"));
    if (opt.lattice < 3 || opt.triple_lattice < 2) config_error("lattices need at least 3 (dipole) and 2 (triple) points");
    const KernelModel m = build_kernel(dim, 2, 8);
    const EigenPairSet pairs = build_eigenpairs(m, level == 0 ? 1 : 2,
                                                grid_of(cfg, dim == 1 ? default_gram_grid(1) : default_branch_grid()));
    RunManifest r;
    json report{{"level", level}};
    if (level == 0) {
        const double mu = assemble_k0(m, pairs, SingularQuadConfig{});
        const double oracle = -dim * dim / 16.0;
        const double rel = std::abs(mu - oracle) / std::abs(oracle);
        report["coefficients"] = {{"mu_1_0", mu}};
        report["roots"] = json::array();
        report["residuals"] = {{"oracle", oracle}, {"relative_error", rel}};
        report["flags"] = {{"matches_oracle", rel < 0.02}};
        r.invariant_checks.push_back({"mu_1_0_matches_minus_N2_over_16", rel < 0.02, rel});
        std::printf("mu_1_0 = %.10f\noracle -N^2/16 = %.10f\nrelative error = %.3e\n", mu, oracle, rel);
    } else if (level == 1) {
        const LevelData l = assemble_level(m, pairs, 1, SingularQuadConfig{});
        const DipoleSystem d = dipole_from_level(l);
        const DipoleReport rep = solve_dipole(d, opt);
        const Eigen::MatrixXd& I = l.projections;
        const double swap = std::max(std::abs(I(0, 0) - I(1, 1)), std::abs(I(0, 1) - I(1, 0)));
        json roots = json::array();
        json res = json::array();
        double closure = 0.0;
        for (const auto& s : rep.solutions) {
            roots.push_back(solution_json(s));
            res.push_back(s.residual);
            double best = INFINITY;
            for (const auto& t : rep.solutions)
                best = std::min(best, std::abs(1.0 - s.coefficients.at(MultiIndex{0, 1}) - t.coefficients.at(MultiIndex{0, 1})));
            closure = std::max(closure, best);
        }
        report["coefficients"] = {{"A", d.A}, {"B", d.B}, {"C", d.C}, {"A_printed", d.A_printed},
                                  {"nondegeneracy", d.nondegeneracy}, {"alpha1", d.alpha1}};
        report["roots"] = roots;
        report["residuals"] = res;
        report["flags"] = {{"cond_a", rep.cond_a},     {"cond_b", rep.cond_b},
                           {"cond_c", rep.cond_c},     {"predicts_two", rep.predicts_two},
                           {"continuum", rep.continuum}, {"root_count", rep.root_count},
                           {"perturbation_controlled", rep.perturbation_controlled},
                           {"omega_sup", rep.omega_sup}, {"warnings", rep.warnings}};
        r.invariant_checks.push_back({"swap_symmetry", swap < 1e-10, swap});
        r.invariant_checks.push_back({"roots_closed_under_swap", closure < 1e-8, closure});
        r.invariant_checks.push_back(
            {"root_count_matches_conditions", rep.predicts_two == (rep.root_count == 2), static_cast<double>(rep.root_count)});
        std::printf("dipole: A = %.3e, B = %.3e, C = %.3e, roots = %d%s\n", d.A, d.B, d.C, rep.root_count,
                    rep.continuum ? " (continuum)" : "");
    } else {
        const TripleSystem t = triple_from_level(assemble_level(m, pairs, 2, SingularQuadConfig{}));
        const TripleReport rep = solve_triple(t, opt);
        json roots = json::array();
        json res = json::array();
        double worst = 0.0;
        for (const auto& s : rep.solutions) {
            roots.push_back(solution_json(s));
            res.push_back(s.residual);
            worst = std::max(worst, s.residual);
        }
        auto conic = [](const ConicCoeffs& q) {
            return json{{"A", q.A}, {"B", q.B}, {"C", q.C}, {"D", q.D}, {"E", q.E}, {"F", q.F}};
        };
        report["coefficients"] = {{"first", conic(t.coeffs[0])}, {"second", conic(t.coeffs[1])},
                                  {"C1_printed", t.C1_printed}, {"nondegeneracy", t.nondegeneracy}};
        report["roots"] = roots;
        report["residuals"] = res;
        report["flags"] = {{"continuum", rep.continuum},
                           {"root_count", rep.root_count},
                           {"conic_kinds", {to_string(rep.conics[0].kind), to_string(rep.conics[1].kind)}},
                           {"conic_infinite", rep.conic_infinite},
                           {"perturbation_controlled", rep.perturbation_controlled},
                           {"warnings", rep.warnings}};
        r.invariant_checks.push_back({"root_residuals", worst < num(cfg, "tol"), worst});
        std::printf("triple: roots = %d%s\n", rep.root_count, rep.continuum ? " (continuum)" : "");
    }
    write_json(out.file("branch", ".json"), report);
    r.results = report;
    return r;
}

RunManifest profile_cmd(const json& cfg, Output& out) {
    if (count(cfg, "N") != 1) config_error("profiles are solved for N = 1 only");
    ProfileConfig pc;
    const GridSpec g = grid_of(cfg, GridSpec::uniform(pc.half_width, pc.cells));
    pc.half_width = g.half_width;
    pc.cells = g.cells();
    pc.theta = num(cfg, "theta");
    pc.residual_tolerance = num(cfg, "tol");
    const KernelModel m = build_kernel(1, 2, 8);
    const std::vector<double> ns = list(cfg, "n");
    const ProfileBranch b = continuation(m, ns, 1, pc);
    const Field F = eval_kernel(m, profile_grid(pc));

    Table t;
    t.columns = {"n", "alpha", "y", "f"};
    json sols = json::array();
    RunManifest r;
    std::vector<double> ln_n, ln_d;
    double worst = 0.0;
    for (const auto& s : b.solutions) {
        for (Eigen::Index i = 0; i < s.field.size(); ++i) t.add({s.n, s.alpha, s.field.grid.axis(i), s.field.values[i]});
        sols.push_back({{"n", s.n},
                        {"alpha", s.alpha},
                        {"beta", s.beta_exp},
                        {"residual", s.residual},
                        {"iterations", s.iterations},
                        {"normalization", s.normalization},
                        {"mass", s.mass},
                        {"last_change", s.last_change}});
        worst = std::max(worst, s.residual);
        const double d = std::sqrt(F.grid.spacing * (s.field.values - F.values).square().sum());
        if (s.n == 0) {
            const Eigen::Index c = (F.size() - 1) / 2;
            const double gap = (s.field.values / s.field.values[c] - F.values / F.values[c]).abs().maxCoeff();
            r.invariant_checks.push_back({"n0_reproduces_kernel", gap < 1e-8, gap});
        } else {
            ln_n.push_back(std::log(s.n));
            ln_d.push_back(std::log(d));
        }
    }
    out.table("profile", t);
    r.invariant_checks.push_back({"branch_complete", b.complete, static_cast<double>(b.solutions.size())});
    r.invariant_checks.push_back({"residuals", worst < num(cfg, "tol"), worst});
    if (ln_n.size() >= 2) {
        const double slope = fit_line(ln_n, ln_d).second;
        r.invariant_checks.push_back({"distance_slope_near_one", std::abs(slope - 1.0) <= 0.2, slope});
        r.results["distance_slope"] = slope;
    }
    r.results["solutions"] = sols;
    r.results["increments"] = b.increments;
    if (!b.complete) r.results["error"] = b.error;
    std::printf("profile branch: %zu of %zu solutions, max residual %.3e\n", b.solutions.size(), ns.size(), worst);
    return r;
}

RunManifest homotopy_cmd(const json& cfg, Output& out, int jobs) {
    PDEConfig pc;
    pc.eps = num(cfg, "eps");
    pc.n = num(cfg, "n");
    pc.t_final = num(cfg, "t_final");
    pc.dt_initial = num(cfg, "dt_initial");
    pc.dt_max = num(cfg, "dt_max");
    pc.adaptive = cfg["adaptive"].get<bool>();
    pc.energy_tolerance = num(cfg, "tol");
    pc.stability_cap = cfg["stability_cap"].get<bool>();
    const GridSpec g = grid_of(cfg, GridSpec::uniform(pc.domain_half_width, pc.cells));
    pc.domain_half_width = g.half_width;
    pc.cells = g.cells();
    validate(pc);
    const Field u0 = bump(g);
    const PDERun run_ = run(pc, u0);
    const Eigen::ArrayXd x = pde_nodes(pc);

    Table snaps;
    snaps.columns = {"t", "x", "u"};
    for (const auto& s : run_.snapshots)
        for (Eigen::Index i = 0; i < x.size(); ++i) snaps.add({s.time, x[i], s.values[i]});
    out.table("snapshots", snaps);
    Table diag;
    diag.columns = {"t", "dt", "mass", "energy", "dissipation", "defect", "flux_sq"};
    for (std::size_t k = 0; k < run_.time.size(); ++k)
        diag.add({run_.time[k], run_.dt[k], run_.mass[k], run_.energy[k], run_.dissipation[k], run_.defect[k],
                  run_.flux_sq[k]});
    out.table("diagnostics", diag);

    RunManifest r;
    bool monotone = true;
    for (std::size_t k = 1; k < run_.energy.size(); ++k) monotone = monotone && run_.energy[k] <= run_.energy[k - 1];
    r.invariant_checks.push_back({"mass_conserved", run_.mass_drift() < 1e-10, run_.mass_drift()});
    r.invariant_checks.push_back({"energy_balance", std::abs(run_.balance_error()) < 0.02, run_.balance_error()});
    r.invariant_checks.push_back({"energy_non_increasing", monotone, run_.final_energy()});
    r.invariant_checks.push_back(
        {"uniform_parabolicity", run_.min_phi >= std::pow(pc.eps, pc.n) * (1 - 1e-15), run_.min_phi});
    r.results["boundary"] = "periodic torus in place of the free-boundary conditions";
    r.results["sup_energy"] = run_.initial_energy();
    r.results["dissipation"] = run_.dissipation.back();
    r.results["flux_sq"] = run_.flux_sq.back();
    r.results["rejected_steps"] = run_.rejected;
    r.results["steps"] = run_.time.size() - 1;
    if (run_.snapshots.size() >= 20) {
        const HolderReport h = holder_report(run_);
        r.results["holder"] = {{"temporal_exponent", h.temporal_exponent},
                               {"lemma_exponent", h.lemma_exponent},
                               {"spatial_constant", h.spatial_constant}};
        Table ht;
        ht.columns = {"gap", "sup_change"};
        for (std::size_t k = 0; k < h.gaps.size(); ++k) ht.add({h.gaps[k], h.sup_changes[k]});
        out.table("holder", ht);
        std::printf("temporal Hoelder exponent %.4f (lemma %.4f)\n", h.temporal_exponent, h.lemma_exponent);
    }
    std::printf("mass drift %.3e, energy balance %.3e\n", run_.mass_drift(), run_.balance_error());

    if (cfg["limit"].get<bool>()) {
        const std::vector<double> eps = list(cfg, "limit_eps");
        const double t_eval = num(cfg, "t_eval");
        PDEConfig base = pc;
        auto study = [&](int which) {
            return limit_study(which == 0 ? schedule_sqrt_log(eps) : schedule_log_squared(eps), u0, t_eval, base);
        };
        LimitReport reports[2];
        if (jobs > 1) {
            auto a = std::async(std::launch::async, study, 0);
            reports[1] = study(1);
            reports[0] = a.get();
        } else {
            reports[0] = study(0);
            reports[1] = study(1);
        }
        Table lt;
        lt.columns = {"schedule", "eps", "n", "distance", "weak_residual", "eps_pow"};
        for (int s = 0; s < 2; ++s)
            for (const auto& row : reports[s].rows)
                lt.add({static_cast<double>(s), row.eps, row.n, row.distance, row.weak_residual, row.eps_pow});
        out.table("limit", lt);
        r.results["limit"] = {{"schedules", {"n = 1/sqrt|ln eps|", "n = 1/|ln eps|^2"}},
                              {"sqrt_log_decreasing", reports[0].strictly_decreasing},
                              {"log_squared_decreasing", reports[1].strictly_decreasing}};
        r.invariant_checks.push_back({"sqrt_log_schedule_decreasing", reports[0].strictly_decreasing,
                                      reports[0].rows.back().distance});
        r.invariant_checks.push_back({"log_squared_schedule_not_decreasing", !reports[1].strictly_decreasing,
                                      reports[1].rows.back().distance});
        std::printf("limit study: sqrt-log decreasing %s, log-squared decreasing %s\n",
                    reports[0].strictly_decreasing ? "yes" : "no", reports[1].strictly_decreasing ? "yes" : "no");
    }
    return r;
}

RunManifest verify_cmd(const json& cfg, Output& out) {
    std::vector<int> ids;
    for (double v : list(cfg, "criteria")) {
        if (v != std::floor(v) || v < 1 || v > kCriteria) config_error("--criteria takes integers in [1, 12]");
        ids.push_back(static_cast<int>(v));
    }
    if (ids.empty() && cfg["quick"].get<bool>()) ids = quick_criteria();
    RunManifest r;
    Table t;
    t.columns = {"criterion", "pass"};
    for (const auto& c : run_acceptance(ids)) {
        std::printf("%s\n", format_line(c).c_str());
        std::fflush(stdout);
        r.invariant_checks.push_back({"criterion_" + std::to_string(c.id), c.pass, c.pass ? 1.0 : 0.0});
        r.results["detail"][std::to_string(c.id)] = c.name + ": " + c.detail;
        t.add({static_cast<double>(c.id), c.pass ? 1.0 : 0.0});
    }
    out.table("verify", t);
    return r;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thin-film and bi-harmonic spectral toolkit"};
    app.require_subcommand(1);

    std::vector<Command> cmds{
        {"kernel", {{"dim", 1}, {"order", 2}, {"derivs", 0}, {"tol", 1e-8}}},
        {"eigen", {{"dim", 1}, {"order", 2}, {"K", 4}, {"tol", 1e-6}}},
        {"evolve", {{"K", 8}, {"taus", {1.0, 2.0, 4.0}}, {"tol", 1e-4}}},
        {"branch", {{"dim", 1}, {"level", 0}, {"lattice", 101}, {"triple_lattice", 11}, {"tol", 1e-8}}},
        {"profile", {{"N", 1}, {"n", {0.0, 0.01, 0.02, 0.04, 0.08}}, {"theta", 0.5}, {"tol", 1e-6}}},
        {"homotopy",
         {{"eps", 1e-2},
          {"n", 1.0},
          {"t_final", 1.0},
          {"dt_initial", 1e-6},
          {"dt_max", 1e-2},
          {"adaptive", true},
          {"stability_cap", false},
          {"limit", false},
          {"limit_eps", {1e-1, 1e-2, 1e-3}},
          {"t_eval", 0.5},
          {"tol", 1e-2}}},
        {"verify", {{"quick", false}, {"criteria", json::array()}, {"tol", 1e-6}}},
    };
    const std::map<std::string, std::string> about{
        {"kernel", "tabulate the rescaled kernel F and its derivatives"},
        {"eigen", "eigenpairs and the bi-orthonormality Gram matrix"},
        {"evolve", "rescaled semigroup: expansion against direct convolution"},
        {"branch", "branching coefficients and roots at level 0, 1 or 2"},
        {"profile", "similarity profiles along a grid in n (N = 1)"},
        {"homotopy", "regularized thin-film run, Hoelder ladder and limit study"},
        {"verify", "acceptance suite with a pass/fail table"},
    };
    for (auto& c : cmds) {
        c.app = app.add_subcommand(c.name, about.at(c.name));
        bind(c);
    }
    // Flag-style switches for the boolean keys.
    for (auto& c : cmds)
        for (const char* k : {"quick", "limit", "adaptive", "stability_cap"})
            if (c.defaults.contains(k)) c.opts[k]->expected(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    Command* cmd = nullptr;
    for (auto& c : cmds)
        if (c.app->parsed()) cmd = &c;

    try {
        for (auto& [k, v] : cmd->raw)
            if (cmd->opts[k]->count() > 0 && v.empty()) v = "true";
        const json cfg = effective_config(*cmd);

        std::string out = cmd->out;
        if (out.empty()) {
            const char* env = std::getenv("SIMFILM_OUT");
            out = env && *env ? env : ".";
        }
        Output o;
        o.format = cmd->format;
        const fs::path p(out);
        if (p.has_extension()) {
            o.dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
            o.primary = p.filename().string();
        } else {
            o.dir = p;
        }
        if (!fs::is_directory(o.dir)) {
            std::cerr << "error: output directory " << o.dir.string() << " does not exist\n";
            return kOutput;
        }
        const std::string stem = o.primary.empty() ? cmd->name : fs::path(o.primary).stem().string();

        RunManifest m;
        if (cmd->name == "kernel") m = kernel_cmd(cfg, o);
        else if (cmd->name == "eigen") m = eigen_cmd(cfg, o);
        else if (cmd->name == "evolve") m = evolve_cmd(cfg, o);
        else if (cmd->name == "branch") m = branch_cmd(cfg, o);
        else if (cmd->name == "profile") m = profile_cmd(cfg, o);
        else if (cmd->name == "homotopy") m = homotopy_cmd(cfg, o, cmd->jobs);
        else m = verify_cmd(cfg, o);

        m.subcommand = cmd->name;
        m.config = cfg;
        m.config_digest = config_digest(cfg);
        m.outputs = o.written;
        const fs::path manifest = o.dir / (stem + ".manifest.json");
        m.outputs.push_back(manifest.string());
        write_json(manifest, m.to_json());

        for (const auto& c : m.invariant_checks)
            std::printf("%-40s %s  %.6g\n", c.name.c_str(), c.pass ? "pass" : "FAIL", c.value);
        return m.all_pass() ? kOk : kInvariant;
    } catch (const OutputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kOutput;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case ErrorKind::Config: return kConfig;
            case ErrorKind::Numerical: return kNumerical;
            case ErrorKind::Invariant: return kInvariant;
        }
    } catch (const json::exception& e) {
        std::cerr << "error: malformed config: " << e.what() << '\n';
        return kConfig;
    }
    return kNumerical;
}
