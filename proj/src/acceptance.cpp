#include "simfilm/acceptance.hpp"
#include "simfilm/branching.hpp"
#include "simfilm/homotopy.hpp"
#include "simfilm/profile.hpp"
#include "simfilm/semigroup.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

namespace simfilm {

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

const KernelModel& k1() {
    static const KernelModel m = build_kernel(1, 2, 10);
    return m;
}

const KernelModel& k2() {
    static const KernelModel m = build_kernel(2, 2, 8);
    return m;
}

const EigenPairSet& branch_pairs() {
    static const EigenPairSet s = build_eigenpairs(k2(), 2, default_branch_grid());
    return s;
}

double hermite_he(int k, double x) {
    double a = 1.0, b = x;
    if (k == 0) return a;
    for (int j = 1; j < k; ++j) {
        const double c = x * b - j * a;
        a = b;
        b = c;
    }
    return b;
}

Verdict kernel_normalization() {
    std::ostringstream os;
    bool pass = true;
    for (int N : {1, 2}) {
        const KernelModel& m = N == 1 ? k1() : k2();
        const GridSpec wide = N == 1 ? GridSpec::uniform(40.0, 800) : GridSpec::tensor(40.0, 400);
        const double mass = integrate(eval_kernel(m, wide));
        const GridSpec near = N == 1 ? GridSpec::uniform(10.0, 400) : GridSpec::tensor(10.0, 100);
        const double res = apply_B(m, eval_kernel(m, near)).values.abs().maxCoeff();
        pass = pass && std::abs(mass - 1.0) < 1e-8 && res < 1e-6;
        os << "N=" << N << " |intF-1|=" << sci(std::abs(mass - 1.0)) << " |BF|=" << sci(res) << " ";
    }
    return {pass, os.str()};
}

Verdict gaussian_oracle() {
    const KernelModel m = build_kernel(1, 1, 6);
    double worst = 0.0;
    for (double y = -15.0; y <= 15.0; y += 0.05) {
        const double g = std::exp(-y * y / 4.0) / (2.0 * std::sqrt(std::numbers::pi));
        worst = std::max(worst, std::abs(kernel_derivative(m, MultiIndex{0}, y) - g));
    }
    const EigenPairSet s = build_eigenpairs(m, 4, default_gram_grid(1));
    const double gram = (gram_matrix(s) - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff();
    const GridSpec g = GridSpec::uniform(12.0, 240);
    double herm = 0.0;
    for (int k = 0; k <= 4; ++k) {
        const Field psi = eigenfunction(m, MultiIndex{k}, g);
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            const double y = g.axis(i);
            const double F = std::exp(-y * y / 4.0) / (2.0 * std::sqrt(std::numbers::pi));
            const double o = std::pow(2.0, -k / 2.0) * hermite_he(k, y / std::sqrt(2.0)) * F / std::sqrt(std::tgamma(k + 1.0));
            herm = std::max(herm, std::abs(psi.values[i] - o));
        }
    }
    return {worst < 1e-10 && gram < 1e-8 && herm < 1e-10,
            "|F-gauss|=" + sci(worst) + " |G-I|=" + sci(gram) + " |psi-hermite|=" + sci(herm)};
}

Verdict envelope_law() {
    const EnvelopeReport r = check_decay_envelope(eval_kernel(k1(), GridSpec::uniform(30.0, 3000)));
    const double d = 3.0 * std::pow(2.0, -11.0 / 3.0);
    const double rel = std::abs(r.fitted_d - d) / d;
    return {rel < 0.25 && r.fit_rms < r.alternative_rms,
            "d=" + sci(r.fitted_d) + " rel=" + sci(rel) + " rms(4/3)=" + sci(r.fit_rms) + " rms(2)=" + sci(r.alternative_rms)};
}

Verdict biorthonormality() {
    const GramReport r = gram_check(k1(), 4, default_gram_grid(1));
    return {r.error < 1e-6 && r.improvement >= 10.0,
            "|G-I|=" + sci(r.error) + " refined=" + sci(r.refined_error) + " improvement=" + sci(r.improvement)};
}

Verdict semigroup_equivalence() {
    const EigenPairSet pairs = build_eigenpairs(k1(), 10, default_gram_grid(1));
    const Field u0 = bump(default_data_grid(1));
    double worst = 0.0;
    for (double tau : {1.0, 2.0, 4.0}) {
        const Field e = evolve_expansion(pairs, u0, tau, 8);
        const Field c = evolve_convolution(k1(), u0, tau, pairs.grid);
        worst = std::max(worst, compare(e, c, tau, 8).l2_error);
    }
    double slope_err = 0.0;
    for (int j = 1; j <= 3; ++j) {
        const Field v = bump(GridSpec::uniform(2.0, 1600), j);
        std::vector<double> taus{4.0, 6.0, 8.0, 10.0}, norms;
        for (double tau : taus) norms.push_back(l2_norm(evolve_convolution(k1(), v, tau, pairs.grid)));
        slope_err = std::max(slope_err, std::abs(log_slope(taus, norms) / j + 0.25) / 0.25);
    }
    return {worst < 1e-4 && slope_err < 0.05, "max L2=" + sci(worst) + " slope rel err=" + sci(slope_err)};
}

Verdict branching_anchor() {
    std::ostringstream os;
    bool pass = true;
    for (int N : {1, 2}) {
        const double mu = N == 1 ? assemble_k0(k1(), build_eigenpairs(k1(), 1, default_gram_grid(1)), SingularQuadConfig{})
                                 : assemble_k0(k2(), branch_pairs(), SingularQuadConfig{});
        const double ref = -N * N / 16.0;
        const double rel = std::abs(mu - ref) / std::abs(ref);
        const double n = 0.05;
        const double gap = std::abs(N / 4.0 + n * mu - N / (4.0 + N * n));
        pass = pass && rel < 0.02 && gap < 5e-4;
        os << "N=" << N << " mu=" << sci(mu) << " rel=" << sci(rel) << " O(n^2) gap=" << sci(gap) << " ";
    }
    return {pass, os.str()};
}

Verdict dipole_system() {
    const LevelData level = assemble_level(k2(), branch_pairs(), 1, SingularQuadConfig{});
    const Eigen::MatrixXd& I = level.projections;
    const double swap = std::max(std::abs(I(0, 0) - I(1, 1)), std::abs(I(0, 1) - I(1, 0)));
    const DipoleSystem d = dipole_from_level(level);
    SolveOptions opt;
    opt.lattice = 11;
    const DipoleReport r = solve_dipole(d, opt);
    std::vector<double> roots;
    for (const auto& s : r.solutions) roots.push_back(s.coefficients.at(MultiIndex{0, 1}));
    double closure = 0.0;
    for (double c : roots) {
        double best = INFINITY;
        for (double e : roots) best = std::min(best, std::abs(1.0 - c - e));
        closure = std::max(closure, best);
    }
    const bool counted = r.predicts_two == (r.root_count == 2);
    return {swap < 1e-10 && !roots.empty() && closure < 1e-8 && counted,
            "swap=" + sci(swap) + " closure=" + sci(closure) + " roots=" + std::to_string(r.root_count) +
                (r.continuum ? " (continuum)" : "") + " conditions(a,b,c)=" + std::to_string(r.cond_a) +
                std::to_string(r.cond_b) + std::to_string(r.cond_c)};
}

std::vector<std::array<double, 2>> grid_scan(const ConicCoeffs& p, const ConicCoeffs& q, double lo, double hi, int n) {
    std::vector<std::array<double, 2>> out;
    const double h = (hi - lo) / n;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double x0 = lo + a * h, y0 = lo + b * h;
            auto changes = [&](const ConicCoeffs& f) {
                const double v[4] = {f(x0, y0), f(x0 + h, y0), f(x0, y0 + h), f(x0 + h, y0 + h)};
                return *std::min_element(v, v + 4) <= 0 && *std::max_element(v, v + 4) >= 0;
            };
            if (!changes(p) || !changes(q)) continue;
            double x = x0 + h / 2, y = y0 + h / 2;
            for (int it = 0; it < 50; ++it) {
                const double f = p(x, y), g = q(x, y);
                const double a11 = 2 * p.A * x + p.C + p.E * y, a12 = 2 * p.B * y + p.D + p.E * x;
                const double a21 = 2 * q.A * x + q.C + q.E * y, a22 = 2 * q.B * y + q.D + q.E * x;
                const double det = a11 * a22 - a12 * a21;
                x -= (f * a22 - g * a12) / det;
                y -= (a11 * g - a21 * f) / det;
            }
            if (std::abs(p(x, y)) > 1e-12 || std::abs(q(x, y)) > 1e-12) continue;
            if (std::none_of(out.begin(), out.end(), [&](const auto& z) { return std::hypot(z[0] - x, z[1] - y) < 1e-8; }))
                out.push_back({x, y});
        }
    return out;
}

double nearest(const std::vector<std::array<double, 2>>& set, const std::array<double, 2>& p) {
    double d = INFINITY;
    for (const auto& z : set) d = std::min(d, std::hypot(z[0] - p[0], z[1] - p[1]));
    return d;
}

Verdict conic_machinery() {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto random_conic = [&] { return ConicCoeffs{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)}; };
    int agree = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const ConicCoeffs q = random_conic();
        bool pos = false, neg = false;
        for (int a = 0; a < 100; ++a)
            for (int b = 0; b < 100; ++b) {
                const double x = -1 + 2.0 * a / 99, y = -1 + 2.0 * b / 99;
                const double v = q.A * x * x + q.B * y * y + q.E * x * y;
                pos = pos || v > 0;
                neg = neg || v < 0;
            }
        const ConicClass c = classify_conic(q);
        const bool hyperbola = pos && neg;
        agree += hyperbola == (c.kind == ConicKind::Hyperbola) &&
                 (hyperbola || c.kind == ConicKind::Ellipse || c.kind == ConicKind::Circle);
    }
    double worst = 0.0;
    std::size_t most = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const ConicCoeffs p = random_conic(), q = random_conic();
        const ConicIntersection cut = intersect_conics(p, q);
        most = std::max(most, cut.points.size());
        const auto scan = grid_scan(p, q, -3.0, 3.0, 300);
        for (const auto& z : scan) worst = std::max(worst, nearest(cut.points, z));
        for (const auto& z : cut.points)
            if (std::abs(z[0]) < 2.9 && std::abs(z[1]) < 2.9) worst = std::max(worst, nearest(scan, z));
    }
    return {agree == 1000 && worst < 1e-10 && most <= 4,
            "classifier " + std::to_string(agree) + "/1000 intersection gap=" + sci(worst) +
                " max count=" + std::to_string(most)};
}

Verdict profile_branch() {
    const ProfileConfig cfg;
    const Field F = eval_kernel(k1(), profile_grid(cfg));
    const ProfileBranch b = continuation(k1(), {0.0, 0.01, 0.02, 0.04, 0.08}, 1, cfg);
    if (!b.complete) return {false, "continuation stopped: " + b.error};
    const Eigen::Index c = (F.size() - 1) / 2;
    const Field& f0 = b.solutions[0].field;
    const double repro = (f0.values / f0.values[c] - F.values / F.values[c]).abs().maxCoeff();
    std::vector<double> ln_n, ln_d;
    for (const auto& s : b.solutions)
        if (s.n > 0) {
            ln_n.push_back(std::log(s.n));
            ln_d.push_back(std::log(std::sqrt(F.grid.spacing * (s.field.values - F.values).square().sum())));
        }
    const double slope = fit_line(ln_n, ln_d).second;
    return {repro < 1e-8 && std::abs(slope - 1.0) <= 0.2, "n=0 gap=" + sci(repro) + " slope=" + sci(slope)};
}

const Field& pde_start() {
    static const Field f = bump(GridSpec::uniform(10.0, 512));
    return f;
}

Verdict pde_invariants() {
    const PDERun r = run(PDEConfig{}, pde_start());
    PDEConfig b;
    b.eps = 0.05;
    b.n = 0.2;
    const PDERun rb = run(b, pde_start());
    PDEConfig c;
    c.eps = 1.0;
    c.adaptive = false;
    c.t_final = 0.05;
    c.snapshot_times = {0.05};
    const Eigen::ArrayXd exact = biharmonic_solution(c, pde_start().values.head(c.cells), c.t_final, true);
    std::vector<double> err;
    for (double dt : {1e-3, 5e-4, 2.5e-4}) {
        c.dt_initial = dt;
        c.dt_max = dt;
        err.push_back((run(c, pde_start()).snapshots.back().values - exact).abs().maxCoeff());
    }
    const double order = std::min(std::log2(err[0] / err[1]), std::log2(err[1] / err[2]));
    const double mass = std::max(r.mass_drift(), rb.mass_drift());
    const double bal = std::max(std::abs(r.balance_error()), std::abs(rb.balance_error()));
    return {mass < 1e-10 && bal < 0.02 && order >= 1.0 - 0.05,
            "mass drift=" + sci(mass) + " balance=" + sci(bal) + " dt order=" + sci(order)};
}

Verdict holder_ladder() {
    const HolderReport h = holder_report(run(PDEConfig{}, pde_start()));
    return {h.temporal_exponent >= 0.125 - 0.02,
            "exponent=" + sci(h.temporal_exponent) + " spatial C=" + sci(h.spatial_constant)};
}

Verdict homotopy_schedule() {
    const std::vector<double> eps{1e-1, 1e-2, 1e-3};
    const LimitReport good = limit_study(schedule_sqrt_log(eps), pde_start(), 0.5);
    const LimitReport bad = limit_study(schedule_log_squared(eps), pde_start(), 0.5);
    std::string d = "sqrt-log:";
    for (const auto& r : good.rows) d += " " + sci(r.distance);
    d += " log-squared:";
    for (const auto& r : bad.rows) d += " " + sci(r.distance);
    return {good.strictly_decreasing && !bad.strictly_decreasing, d};
}

struct Entry {
    const char* name;
    std::function<Verdict()> check;
};

const std::vector<Entry>& entries() {
    static const std::vector<Entry> e{
        {"kernel normalization and residual", kernel_normalization},
        {"gaussian oracle and Hermite Gram", gaussian_oracle},
        {"envelope law", envelope_law},
        {"bi-orthonormality", biorthonormality},
        {"semigroup equivalence", semigroup_equivalence},
        {"branching anchor", branching_anchor},
        {"dipole system", dipole_system},
        {"conic machinery", conic_machinery},
        {"profile branch", profile_branch},
        {"PDE invariants", pde_invariants},
        {"Hoelder ladder", holder_ladder},
        {"homotopy schedule", homotopy_schedule},
    };
    return e;
}

}  // namespace

std::vector<int> quick_criteria() { return {1, 2, 3, 4, 5, 8, 9, 10, 11, 12}; }

std::vector<CriterionResult> run_acceptance(const std::vector<int>& ids) {
    std::vector<int> todo = ids;
    if (todo.empty())
        for (int i = 1; i <= kCriteria; ++i) todo.push_back(i);
    std::vector<CriterionResult> out;
    for (int id : todo) {
        if (id < 1 || id > kCriteria) config_error("unknown acceptance criterion " + std::to_string(id));
        const Entry& e = entries()[static_cast<std::size_t>(id - 1)];
        CriterionResult r;
        r.id = id;
        r.name = e.name;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const Verdict v = e.check();
            r.pass = v.pass;
            r.detail = v.detail;
        } catch (const std::exception& ex) {
            r.pass = false;
            r.detail = std::string("error: ") + ex.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(r);
    }
    return out;
}

std::string format_line(const CriterionResult& r) {
    char t[32];
    std::snprintf(t, sizeof t, "%.1fs", r.seconds);
    return std::string(r.pass ? "[PASS] " : "[FAIL] ") + std::to_string(r.id) + " " + r.name + ": " + r.detail + " (" +
           t + ")";
}

}  // namespace simfilm
