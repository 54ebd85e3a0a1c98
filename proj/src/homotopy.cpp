#include "simfilm/homotopy.hpp"
#include "simfilm/numerics.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace simfilm {

double phi_eps(double u, double eps, double n) {
    return std::pow(eps, n) + (1.0 - eps) * std::pow(eps * eps + u * u, n / 2.0);
}

void validate(const PDEConfig& cfg) {
    if (!(cfg.eps > 0.0 && cfg.eps <= 1.0)) config_error("eps must lie in (0, 1]");
    if (!(cfg.n >= 0.0)) config_error("n must be non-negative");
    if (cfg.cells < 64) config_error("the PDE grid needs at least 64 cells");
    if (!(cfg.dt_initial > 0.0)) config_error("dt_initial must be positive");
    if (!(cfg.t_final > 0.0)) config_error("t_final must be positive");
    if (!(cfg.domain_half_width > 0.0)) config_error("domain half width must be positive");
    if (cfg.boundary != "periodic") config_error("only periodic boundaries are supported");
    if (!(cfg.dt_max >= cfg.dt_initial)) config_error("dt_max must be at least dt_initial");
}

Eigen::ArrayXd pde_nodes(const PDEConfig& cfg) {
    const double h = 2.0 * cfg.domain_half_width / static_cast<double>(cfg.cells);
    return -cfg.domain_half_width + h * Eigen::ArrayXd::LinSpaced(cfg.cells, 0.0, static_cast<double>(cfg.cells - 1));
}

PDEState initial_state(const PDEConfig& cfg, const Field& u0) {
    validate(cfg);
    if (!(u0.grid == GridSpec::uniform(cfg.domain_half_width, cfg.cells)))
        config_error("initial data must live on the uniform grid of the PDE domain");
    const Eigen::ArrayXd& v = u0.values;
    const double scale = std::max(1.0, v.abs().maxCoeff());
    if (std::abs(v[0]) > 1e-12 * scale || std::abs(v[v.size() - 1]) > 1e-12 * scale)
        config_error("initial data must vanish at the domain boundary");
    if (!v.allFinite()) config_error("initial data is not finite");
    return {0.0, v.head(cfg.cells)};
}

namespace {

Eigen::Index wrap(Eigen::Index i, Eigen::Index M) { return ((i % M) + M) % M; }

double spacing(const PDEConfig& cfg) { return 2.0 * cfg.domain_half_width / static_cast<double>(cfg.cells); }

// D+ on nodes: value at face i + 1/2.
Eigen::ArrayXd forward(const Eigen::ArrayXd& u, double h) {
    const Eigen::Index M = u.size();
    Eigen::ArrayXd d(M);
    for (Eigen::Index i = 0; i < M; ++i) d[i] = (u[wrap(i + 1, M)] - u[i]) / h;
    return d;
}

Eigen::ArrayXd laplacian(const Eigen::ArrayXd& u, double h) {
    const Eigen::Index M = u.size();
    Eigen::ArrayXd d(M);
    for (Eigen::Index i = 0; i < M; ++i) d[i] = (u[wrap(i + 1, M)] - 2 * u[i] + u[wrap(i - 1, M)]) / (h * h);
    return d;
}

Eigen::ArrayXd face_mobility(const Eigen::ArrayXd& u, const PDEConfig& cfg) {
    const Eigen::Index M = u.size();
    Eigen::ArrayXd phi(M);
    for (Eigen::Index i = 0; i < M; ++i) phi[i] = phi_eps(0.5 * (u[i] + u[wrap(i + 1, M)]), cfg.eps, cfg.n);
    return phi;
}

double energy(const Eigen::ArrayXd& u, double h) { return 0.5 * h * forward(u, h).square().sum(); }

Eigen::ArrayXd battery_values(const TestBump& b, const Eigen::ArrayXd& x) {
    return x.unaryExpr([&](double v) {
        const double z = (v - b.center) / b.width;
        return std::abs(z) < 1.0 ? std::exp(-1.0 / (1.0 - z * z)) : 0.0;
    });
}

}  // namespace

double stability_cap(const PDEConfig& cfg, const Eigen::ArrayXd& u) {
    const double h = spacing(cfg);
    return h * h * h * h / (8.0 * face_mobility(u, cfg).maxCoeff());
}

PDEState step(const PDEState& state, const PDEConfig& cfg, double dt, StepBalance& balance) {
    if (!(dt > 0.0) || !std::isfinite(dt)) config_error("time step must be positive and finite");
    const Eigen::Index M = state.values.size();
    if (M != cfg.cells) config_error("state size differs from the configured cell count");
    const double h = spacing(cfg);
    const Eigen::ArrayXd phi = face_mobility(state.values, cfg);
    if (cfg.stability_cap && dt > h * h * h * h / (8.0 * phi.maxCoeff()) * (1 + 1e-12))
        config_error("time step above the stability cap");
    const double c = dt / (h * h * h * h);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(5 * M));
    for (Eigen::Index i = 0; i < M; ++i) {
        const double p = phi[i], q = phi[wrap(i - 1, M)];
        t.emplace_back(i, wrap(i + 2, M), c * p);
        t.emplace_back(i, wrap(i + 1, M), c * (-3 * p - q));
        t.emplace_back(i, i, 1.0 + c * (3 * p + 3 * q));
        t.emplace_back(i, wrap(i - 1, M), c * (-p - 3 * q));
        t.emplace_back(i, wrap(i - 2, M), c * q);
    }
    Eigen::SparseMatrix<double> A(M, M);
    A.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) numerical_error("cyclic banded factorization failed");
    Eigen::VectorXd sol = lu.solve(state.values.matrix());
    sol += lu.solve(state.values.matrix() - A * sol);
    if (lu.info() != Eigen::Success || !sol.allFinite()) numerical_error("cyclic banded solve failed");

    // Rebuild u_new from the face fluxes so the update telescopes.
    const Eigen::ArrayXd g = forward(laplacian(sol.array(), h), h);
    const Eigen::ArrayXd flux = dt * phi * g;
    PDEState next{state.time + dt, state.values};
    for (Eigen::Index i = 0; i < M; ++i) next.values[i] -= (flux[i] - flux[wrap(i - 1, M)]) / h;
    balance.energy_before = energy(state.values, h);
    balance.energy_after = energy(next.values, h);
    balance.dissipation = dt * h * (phi * g.square()).sum();
    balance.defect = energy(next.values - state.values, h);
    balance.flux_sq = dt * h * (phi * g).square().sum();
    balance.min_phi = phi.minCoeff();
    return next;
}

PDEState step(const PDEState& state, const PDEConfig& cfg, double dt) {
    StepBalance b;
    return step(state, cfg, dt, b);
}

const std::vector<TestBump>& test_battery() {
    static const std::vector<TestBump> b{{-2.0, 1.0}, {-1.2, 0.6}, {-0.5, 1.5}, {0.0, 0.8},
                                         {0.3, 2.0}, {0.9, 0.5}, {1.5, 1.2}, {2.5, 0.9}};
    return b;
}

double PDERun::balance_error() const { return (energy.back() + dissipation.back()) / energy.front() - 1.0; }

double PDERun::mass_drift() const {
    double worst = 0.0;
    for (double m : mass) worst = std::max(worst, std::abs(m - mass.front()));
    return worst / std::max(1.0, std::abs(mass.front()));
}

PDERun run(const PDEConfig& cfg, const Field& u0) {
    PDEState u = initial_state(cfg, u0);
    const double h = spacing(cfg);
    const Eigen::ArrayXd x = pde_nodes(cfg);

    std::vector<double> stops = cfg.snapshot_times;
    if (stops.empty())
        for (int k = 0; k < cfg.ladder_levels; ++k) stops.push_back(cfg.t_final * std::pow(0.5, k));
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
    if (stops.front() <= 0.0 || stops.back() > cfg.t_final * (1 + 1e-12)) config_error("snapshot times must lie in (0, t_final]");
    if (stops.back() < cfg.t_final) stops.push_back(cfg.t_final);

    PDERun r;
    r.config = cfg;
    r.snapshots.push_back(u);
    r.time.push_back(0.0);
    r.dt.push_back(0.0);
    r.mass.push_back(h * u.values.sum());
    r.energy.push_back(energy(u.values, h));
    r.dissipation.push_back(0.0);
    r.defect.push_back(0.0);
    r.flux_sq.push_back(0.0);
    r.min_phi = face_mobility(u.values, cfg).minCoeff();

    std::vector<Eigen::ArrayXd> psi, dpsi;
    for (const TestBump& b : test_battery()) {
        psi.push_back(battery_values(b, x));
        dpsi.push_back(forward(psi.back(), h));
        r.weak_change.push_back(0.0);
        r.weak_flux.push_back(0.0);
    }
    const Eigen::ArrayXd start = u.values;

    double dt = cfg.dt_initial;
    int clean = 0;
    std::size_t next_stop = 0;
    while (next_stop < stops.size()) {
        const double target = stops[next_stop];
        const double remaining = target - u.time;
        if (cfg.stability_cap) dt = std::min(dt, stability_cap(cfg, u.values));
        const bool lands = dt >= remaining * (1 - 1e-12);
        const double use = lands ? remaining : dt;
        StepBalance b;
        PDEState trial = step(u, cfg, use, b);
        if (cfg.adaptive && b.defect > cfg.energy_tolerance * std::max(b.dissipation, 1e-300) && use > 1e-14) {
            dt = use / 2;
            clean = 0;
            ++r.rejected;
            if (dt < 1e-14) numerical_error("adaptive time step fell below 1e-14");
            continue;
        }
        if (lands) trial.time = target;
        const Eigen::ArrayXd g = forward(laplacian(trial.values, h), h);
        for (std::size_t k = 0; k < psi.size(); ++k) r.weak_flux[k] += use * h * (dpsi[k] * g).sum();
        u = std::move(trial);
        if (u.values.abs().maxCoeff() > 1e6) numerical_error("solution exceeded 1e6: blow-up guard");
        r.time.push_back(u.time);
        r.dt.push_back(use);
        r.mass.push_back(h * u.values.sum());
        r.energy.push_back(b.energy_after);
        r.dissipation.push_back(r.dissipation.back() + b.dissipation);
        r.defect.push_back(r.defect.back() + b.defect);
        r.flux_sq.push_back(r.flux_sq.back() + b.flux_sq);
        r.min_phi = std::min(r.min_phi, b.min_phi);
        if (lands) {
            r.snapshots.push_back(u);
            ++next_stop;
        }
        if (cfg.adaptive && ++clean >= 10) {
            dt = std::min(2 * dt, cfg.dt_max);
            clean = 0;
        }
    }
    for (std::size_t k = 0; k < psi.size(); ++k) r.weak_change[k] = h * (psi[k] * (u.values - start)).sum();
    return r;
}

Eigen::ArrayXd biharmonic_solution(const PDEConfig& cfg, const Eigen::ArrayXd& u0, double t, bool discrete) {
    const Eigen::Index M = u0.size();
    if (M != cfg.cells) config_error("data size differs from the configured cell count");
    const Eigen::ArrayXd x = pde_nodes(cfg);
    const double P = 2.0 * cfg.domain_half_width;
    Eigen::ArrayXd out = Eigen::ArrayXd::Constant(M, u0.sum() / static_cast<double>(M));
    for (Eigen::Index k = 1; k <= M / 2; ++k) {
        const double xi = 2.0 * std::numbers::pi * static_cast<double>(k) / P;
        const Eigen::ArrayXd c = (xi * x).cos(), s = (xi * x).sin();
        const double a = (u0 * c).sum(), b = (u0 * s).sum();
        const double h = spacing(cfg);
        const double sym = discrete ? std::pow(2.0 * std::sin(0.5 * xi * h) / h, 4) : std::pow(xi, 4);
        const double w = (2 * k == M ? 1.0 : 2.0) * std::exp(-sym * t) / static_cast<double>(M);
        out += w * (a * c + b * s);
    }
    return out;
}

HolderReport holder_report(const PDERun& run) {
    if (run.snapshots.size() < 20) config_error("Hoelder fit needs at least 20 snapshots");
    HolderReport r;
    const Eigen::ArrayXd& u0 = run.snapshots.front().values;
    std::vector<double> lx, ly;
    for (std::size_t k = 1; k < run.snapshots.size(); ++k) {
        const double gap = run.snapshots[k].time;
        const double change = (run.snapshots[k].values - u0).abs().maxCoeff();
        r.gaps.push_back(gap);
        r.sup_changes.push_back(change);
        if (change > 0.0) {
            lx.push_back(std::log(gap));
            ly.push_back(std::log(change));
        }
    }
    if (lx.size() < 2) numerical_error("solution does not change over the snapshot ladder");
    r.temporal_exponent = fit_line(lx, ly).second;
    const Eigen::ArrayXd x = pde_nodes(run.config);
    for (const PDEState& s : run.snapshots) {
        const Eigen::Index M = s.values.size();
        for (Eigen::Index i = 0; i < M; ++i)
            for (Eigen::Index j = i + 1; j < M; ++j)
                r.spatial_constant =
                    std::max(r.spatial_constant, std::abs(s.values[i] - s.values[j]) / std::sqrt(x[j] - x[i]));
    }
    return r;
}

std::vector<ScheduleEntry> schedule_sqrt_log(const std::vector<double>& eps) {
    std::vector<ScheduleEntry> s;
    for (double e : eps) s.push_back({e, 1.0 / std::sqrt(std::abs(std::log(e)))});
    return s;
}

std::vector<ScheduleEntry> schedule_log_squared(const std::vector<double>& eps) {
    std::vector<ScheduleEntry> s;
    for (double e : eps) s.push_back({e, 1.0 / std::pow(std::log(e), 2)});
    return s;
}

LimitReport limit_study(const std::vector<ScheduleEntry>& schedule, const Field& u0, double t_eval, const PDEConfig& base) {
    if (schedule.empty()) config_error("empty schedule");
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (!(schedule[i].eps < schedule[i - 1].eps)) config_error("schedule eps must be decreasing");
    LimitReport rep;
    for (const ScheduleEntry& e : schedule) {
        PDEConfig cfg = base;
        cfg.eps = e.eps;
        cfg.n = e.n;
        cfg.t_final = t_eval;
        cfg.snapshot_times = {t_eval};
        const PDERun r = run(cfg, u0);
        const double h = spacing(cfg);
        const Eigen::ArrayXd exact = biharmonic_solution(cfg, r.snapshots.front().values, t_eval);
        LimitRow row;
        row.eps = e.eps;
        row.n = e.n;
        row.distance = std::sqrt(h * (r.snapshots.back().values - exact).square().sum());
        for (std::size_t k = 0; k < r.weak_change.size(); ++k)
            row.weak_residual = std::max(row.weak_residual, std::abs(r.weak_change[k] - r.weak_flux[k]));
        row.eps_pow = std::exp(0.5 * e.n * std::log(e.eps));
        rep.rows.push_back(row);
    }
    rep.strictly_decreasing = rep.rows.size() >= 2;
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        rep.strictly_decreasing = rep.strictly_decreasing && rep.rows[i].distance < rep.rows[i - 1].distance;
    return rep;
}

}  // namespace simfilm
