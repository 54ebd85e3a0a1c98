#pragma once

#include "simfilm/kernel.hpp"

#include <string>
#include <vector>

namespace simfilm {

struct AlphaPair {
    double alpha = 0.0;
    double beta = 0.0;
};

/// Source-type exponents (N/(4+Nn), 1/(4+Nn)).
AlphaPair alpha_mass(int N, double n);

/// First-order law (k+N)/4 + mu1k n.
double alpha_expansion(int k, int N, double n, double mu1k);
/// The first-order law is only meant for small n.
inline bool expansion_trusted(double n) { return n <= 0.5; }

struct ProfileConfig {
    double half_width = 40.0;
    Eigen::Index cells = 800;
    /// |f|^n is evaluated as (f^2 + eta^2)^{n/2}.
    double eta = 1e-8;
    double theta = 0.5;
    double tolerance = 1e-9;
    int max_sweeps = 500;
    double divergence_bound = 1e3;
    double residual_tolerance = 1e-6;
};

/// The solver grid: uniform on [-L, L] with an odd node count, treated as
/// periodic with period (cells + 1) * h.
GridSpec profile_grid(const ProfileConfig& cfg);

/// Fourier differentiation matrices on a periodic 1D grid; Pk = (I + D4)^{-1} Dk.
struct SpectralOps {
    GridSpec grid;
    Eigen::ArrayXd y;
    Eigen::MatrixXd D1, D3, D4;
    Eigen::MatrixXd P0, P1, P4;
    /// Node of y = 0.
    Eigen::Index center = 0;
};

SpectralOps spectral_ops(const GridSpec& grid);

/// L(alpha, n) f = -f'''' + beta (y f)' + (alpha - beta) f with beta = (1 - alpha n)/4.
Eigen::MatrixXd similarity_operator(const SpectralOps& ops, double alpha, double n);

/// (I + D4)^{-1} L(alpha, n), the form that is factorized.
Eigen::MatrixXd preconditioned_operator(const SpectralOps& ops, double alpha, double n);

/// N(n, f) = ((1 - |f|^n) f''')'.
Eigen::VectorXd thin_film_term(const SpectralOps& ops, const Eigen::VectorXd& f, double n, double eta);

/// N_0(psi) = -(ln|psi| psi''')' - (alpha0/4) y psi' + mu psi.
Eigen::VectorXd linearized_term(const SpectralOps& ops, const Eigen::VectorXd& psi, double mu, double eta);

struct PerturbationField {
    int level = 0;
    Field field;
    double mu_used = 0.0;
    /// <N_0(psi_0), 1> before projection.
    double solvability = 0.0;
    /// <Phi, psi_0*>.
    double orthogonality = 0.0;
    /// ||B Phi + projected N_0(psi_0)||_2.
    double residual = 0.0;
};

/// Solves B Phi = -N_0(psi_0) on the complement of psi_0 (N = 1).
PerturbationField solve_perturbation_k0(const KernelModel& model, double mu10, const ProfileConfig& cfg = {});

struct ProfileSolution {
    double n = 0.0;
    double alpha = 0.0;
    double beta_exp = 0.0;
    Field field;
    int iterations = 0;
    /// max |L f + N(f)| off the nodes next to sign changes.
    double residual = 0.0;
    double normalization = 0.0;
    double theta = 0.0;
    /// L2 change over the last sweep.
    double last_change = 0.0;
    double mass = 0.0;
};

/// Damped iteration f <- (1 - theta) f + theta G(n, f) with G(n, f) = -L^{-1} N(n, f)
/// taken on the affine set f(0) = delta0 (N = 1).
ProfileSolution fixed_point_profile(const KernelModel& model, double n, double alpha, const Field& init, double delta0,
                                    const ProfileConfig& cfg = {});

struct ProfileBranch {
    std::vector<ProfileSolution> solutions;
    /// ||f_{j+1} - f_j||_2.
    std::vector<double> increments;
    bool complete = true;
    std::string error;
    ErrorKind error_kind = ErrorKind::Numerical;
};

/// Warm-started sweep along n_grid with alpha = alpha_mass(N, n) and delta0 = F(0).
ProfileBranch continuation(const KernelModel& model, const std::vector<double>& n_grid, int N,
                           const ProfileConfig& cfg = {});

struct OscillationReport {
    std::vector<double> sign_changes;
    /// Local extrema of |f| on y > 0 between sign changes, outward.
    std::vector<double> extrema_at, amplitudes;
    bool envelope_decreasing = true;
    /// Ratios of consecutive gaps between sign changes on y > 0.
    std::vector<double> spacing_ratios;
    /// Largest y with |f| above 1e-9 max |f|; smaller values count as zero.
    double support_edge = 0.0;
    /// Slope of ln(amplitude) against ln(y) over the outer half of the extrema.
    double decay_order = 0.0;
};

OscillationReport oscillation_report(const ProfileSolution& sol);

}  // namespace simfilm
