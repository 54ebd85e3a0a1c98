#pragma once

#include "simfilm/core.hpp"

#include <string>
#include <vector>

namespace simfilm {

/// eps^n + (1 - eps)(eps^2 + u^2)^{n/2}.
double phi_eps(double u, double eps, double n);

struct PDEConfig {
    double eps = 1e-2;
    double n = 1.0;
    double domain_half_width = 10.0;
    Eigen::Index cells = 512;
    double dt_initial = 1e-6;
    double t_final = 1.0;
    std::string boundary = "periodic";
    /// Fixed dt when false.
    bool adaptive = true;
    double dt_max = 1e-2;
    /// A step is retried with dt/2 when the discrete energy defect exceeds
    /// this fraction of the step's dissipation.
    double energy_tolerance = 1e-2;
    /// Snapshot times; empty selects the dyadic ladder t_final 2^{-k}, k < ladder_levels.
    std::vector<double> snapshot_times;
    int ladder_levels = 24;
    /// Enforces dt <= h^4 / (8 max phi); off by default since the scheme is
    /// unconditionally energy stable.
    bool stability_cap = false;
};

/// h^4 / (8 max phi_eps(u)).
double stability_cap(const PDEConfig& cfg, const Eigen::ArrayXd& u);

void validate(const PDEConfig& cfg);

/// Periodic nodes x_i = -L + i h, i < cells.
Eigen::ArrayXd pde_nodes(const PDEConfig& cfg);

struct PDEState {
    double time = 0.0;
    Eigen::ArrayXd values;
};

/// Restricts a field on GridSpec::uniform(L, cells) to the periodic nodes.
PDEState initial_state(const PDEConfig& cfg, const Field& u0);

/// One linearly implicit step (I + dt D-(phi D+ D- D+)) u_new = u_old with phi frozen at u_old.
PDEState step(const PDEState& state, const PDEConfig& cfg, double dt);

/// Terms of the discrete energy identity E(u_new) + dissipation + defect = E(u_old).
struct StepBalance {
    double energy_before = 0.0;
    double energy_after = 0.0;
    double dissipation = 0.0;
    double defect = 0.0;
    /// dt * sum h |phi D+ Lap u_new|^2.
    double flux_sq = 0.0;
    double min_phi = 0.0;
};

PDEState step(const PDEState& state, const PDEConfig& cfg, double dt, StepBalance& balance);

/// Smooth test function exp(-1/(1 - ((x - center)/width)^2)).
struct TestBump {
    double center = 0.0;
    double width = 1.0;
};

/// Eight bumps shared by every run.
const std::vector<TestBump>& test_battery();

struct PDERun {
    PDEConfig config;
    std::vector<PDEState> snapshots;
    std::vector<double> time, dt, mass, energy;
    /// Running sums of the dissipation, the defect and int int |h_eps|^2.
    std::vector<double> dissipation, defect, flux_sq;
    double min_phi = 0.0;
    int rejected = 0;
    /// Per battery bump psi: int psi (u(T) - u(0)) and int_0^T int psi' (Lap u)'.
    std::vector<double> weak_change, weak_flux;

    double initial_energy() const { return energy.front(); }
    double final_energy() const { return energy.back(); }
    /// (E(T) + dissipation) / E(0) - 1.
    double balance_error() const;
    double mass_drift() const;
};

PDERun run(const PDEConfig& cfg, const Field& u0);

/// Exact periodic solution of u_t = -u'''' from the grid values, by direct DFT.
/// With discrete set, the multiplier uses the symbol of the difference operator,
/// (2 sin(xi h / 2) / h)^4, so only the time discretization differs from a run.
Eigen::ArrayXd biharmonic_solution(const PDEConfig& cfg, const Eigen::ArrayXd& u0, double t, bool discrete = false);

struct HolderReport {
    std::vector<double> gaps, sup_changes;
    double temporal_exponent = 0.0;
    /// N/(4(N+1)) for N = 1.
    double lemma_exponent = 0.125;
    /// max |u(x1,t) - u(x2,t)| / |x1 - x2|^{1/2} over snapshots.
    double spatial_constant = 0.0;
};

/// Fits sup_x |u(t_k) - u(0)| against t_k over the snapshot ladder.
HolderReport holder_report(const PDERun& run);

struct ScheduleEntry {
    double eps = 1.0;
    double n = 0.0;
};

std::vector<ScheduleEntry> schedule_sqrt_log(const std::vector<double>& eps);
std::vector<ScheduleEntry> schedule_log_squared(const std::vector<double>& eps);

struct LimitRow {
    double eps = 0.0;
    double n = 0.0;
    double distance = 0.0;
    /// max over the battery of |weak_change - weak_flux|.
    double weak_residual = 0.0;
    double eps_pow = 0.0;
};

struct LimitReport {
    std::vector<LimitRow> rows;
    bool strictly_decreasing = false;
};

LimitReport limit_study(const std::vector<ScheduleEntry>& schedule, const Field& u0, double t_eval,
                        const PDEConfig& base = {});

}  // namespace simfilm
