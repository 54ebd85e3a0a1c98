#pragma once

#include "simfilm/spectral.hpp"

#include <array>
#include <functional>
#include <map>
#include <string>

namespace simfilm {

/// Log-singular quadrature settings. Grid lines are integrated with f and the weight
/// linear per interval; intervals within distance `exclusion_radius` of a zero of f are
/// integrated in closed form, the rest by the trapezoid rule on ln|f|. Level l coarsens
/// the grid by 2^l and the levels are extrapolated to zero spacing.
struct SingularQuadConfig {
    double exclusion_radius = 2.0;
    int extrapolation_levels = 3;
    /// Smallest allowed number of cells per axis on the coarsest level.
    double min_cells = 16.0;
};

struct SingularEstimate {
    double value = 0.0;
    /// Largest change of the extrapolated value over the last two levels.
    double error = 0.0;
    /// Line-rule values per level, finest first.
    std::vector<double> levels;
};

/// Sign changes of f along grid lines must be at least 3 cells apart. In 2D a
/// location fails only when both its row and its column fail, so transversal
/// crossings of two nodal curves are accepted.
void check_transversal(const Field& f);

/// int g_q ln|log_arg| for each integrand g_q (arrays over the grid of log_arg).
std::vector<SingularEstimate> log_moments(const std::vector<Eigen::ArrayXd>& integrands, const Field& log_arg,
                                          const SingularQuadConfig& cfg);

/// int weight_grad . flux ln|log_arg|; vector arguments hold one field per component.
SingularEstimate singular_quadrature(const std::vector<Field>& weight_grad, const Field& log_arg,
                                     const std::vector<Field>& flux, const SingularQuadConfig& cfg);
double singular_inner_product(const std::vector<Field>& weight_grad, const Field& log_arg,
                              const std::vector<Field>& flux, const SingularQuadConfig& cfg);

/// Default quadrature grid for branching integrals: tensor, half-width 36, spacing 0.06.
GridSpec default_branch_grid();

/// mu_{1,0} = <div(ln|psi_0| grad Lap psi_0) + (N/16) y.grad psi_0, psi_0*>.
double assemble_k0(const KernelModel& model, const EigenPairSet& pairs, const SingularQuadConfig& cfg);

/// Log terms Omega_i(c) = int grad psi_i* . ln|Psi| grad Lap Psi for Psi = sum_j c_j psi^_j.
using LogTerms = std::function<std::vector<SingularEstimate>(const std::vector<double>& c)>;

/// Data shared by the k = 1, 2 systems: basis psi^_j, adjoints psi_i*,
/// I_ij = <psi_i*, y.grad psi^_j> and the log terms.
struct LevelData {
    int level = 0;
    double alpha = 0.0;
    std::vector<MultiIndex> basis;
    Eigen::MatrixXd projections;
    /// <psi^_1, y.grad psi^_1> without the adjoint.
    double self_projection = 0.0;
    LogTerms log_terms;
};

/// Level data from the eigenpairs of order `level` in `pairs` (N = 2 for level >= 1).
LevelData assemble_level(const KernelModel& model, const EigenPairSet& pairs, int level, const SingularQuadConfig& cfg);

/// c2^2 A + c2 B + C + omega(c2) = 0 with c1 = 1 - c2.
struct DipoleSystem {
    double A = 0.0, B = 0.0, C = 0.0;
    /// A under the alternative sign convention (-A).
    double A_printed = 0.0;
    std::function<SingularEstimate(double)> omega;
    /// mu_{1,1} at a root c2.
    std::function<double(double)> mu;
    double nondegeneracy = 0.0;
    double alpha1 = 0.75;
    bool degenerate = false;
    Eigen::MatrixXd projections;
};

DipoleSystem assemble_dipole(const KernelModel& model, const EigenPairSet& pairs, const SingularQuadConfig& cfg);
DipoleSystem dipole_from_level(const LevelData& level);
/// Quadratic with omega = 0 and mu = 0.
DipoleSystem dipole_from_coefficients(double A, double B, double C);

struct BranchSolution {
    int level = 0;
    std::map<MultiIndex, double> coefficients;
    double mu_first = 0.0;
    double residual = 0.0;
    int newton_iters = 0;
    std::string note;
};

struct SolveOptions {
    double tolerance = 1e-8;
    int max_newton = 50;
    /// Coefficients below this magnitude are treated as zero in the root conditions.
    double coefficient_floor = 1e-9;
    int lattice = 101;
    /// Points per axis of the (c2, c3) lattice on [0, 1]^2.
    int triple_lattice = 11;
};

struct DipoleReport {
    std::vector<BranchSolution> solutions;
    /// Lattice of c2 values and the residual F + omega on it.
    std::vector<double> lattice, lattice_residual;
    /// Isolated roots in [0, 1]; -1 marks a continuum of solutions.
    int root_count = 0;
    bool continuum = false;
    bool cond_a = false, cond_b = false, cond_c = false;
    /// The three conditions together predict exactly two roots.
    bool predicts_two = false;
    double omega_sup = 0.0;
    /// Largest quadrature error of omega over the lattice.
    double omega_error = 0.0;
    bool perturbation_controlled = false;
    std::vector<std::string> warnings;
};

DipoleReport solve_dipole(const DipoleSystem& sys, const SolveOptions& opt = {});

/// A c2^2 + B c3^2 + C c2 + D c3 + E c2 c3 + F.
struct ConicCoeffs {
    double A = 0.0, B = 0.0, C = 0.0, D = 0.0, E = 0.0, F = 0.0;
    double operator()(double x, double y) const { return A * x * x + B * y * y + C * x + D * y + E * x * y + F; }
};

enum class ConicKind { Ellipse, Circle, Parabola, Hyperbola, Degenerate };
std::string to_string(ConicKind kind);

/// The kind follows the quadratic part; Degenerate means that part vanishes.
/// `degenerate` reports a vanishing 3x3 conic determinant.
struct ConicClass {
    ConicKind kind = ConicKind::Degenerate;
    bool degenerate = false;
    /// E^2 - 4AB.
    double discriminant = 0.0;
    double determinant = 0.0;
    /// Ellipse with no real points.
    bool empty = false;
};

ConicClass classify_conic(const ConicCoeffs& q);

struct ConicIntersection {
    std::vector<std::array<double, 2>> points;
    /// The two conics share a component.
    bool infinite = false;
};

/// Real intersections by the resultant in c3 (a quartic in c2), polished by Newton.
ConicIntersection intersect_conics(const ConicCoeffs& p, const ConicCoeffs& q);

struct TripleSystem {
    std::array<ConicCoeffs, 2> coeffs;
    /// C1 under the alternative convention, with the opposite sign on <psi^_1*, y.grad psi^_1>.
    double C1_printed = 0.0;
    /// C1 and D1 with psi^_1 in place of psi^_1* in the last integral.
    double C1_unstarred = 0.0, D1_unstarred = 0.0;
    std::function<std::array<SingularEstimate, 2>(double, double)> omega;
    /// mu_{1,2} at (c2, c3); sets `fallback` when c2 = c3 forces least squares.
    std::function<double(double, double, bool&)> mu;
    double nondegeneracy = 0.0;
    double alpha2 = 1.0;
    bool degenerate = false;
    Eigen::MatrixXd projections;
};

TripleSystem assemble_triple(const KernelModel& model, const EigenPairSet& pairs, const SingularQuadConfig& cfg);
TripleSystem triple_from_level(const LevelData& level);
TripleSystem triple_from_conics(const ConicCoeffs& first, const ConicCoeffs& second);

struct TripleReport {
    std::vector<BranchSolution> solutions;
    /// Roots in [0, 1]^2; -1 when some root lies on a curve of solutions.
    int root_count = 0;
    bool continuum = false;
    std::array<ConicClass, 2> conics;
    /// Roots of the unperturbed conics inside [0, 1]^2.
    std::vector<std::array<double, 2>> conic_roots;
    bool conic_infinite = false;
    std::array<double, 2> omega_sup{0.0, 0.0};
    bool perturbation_controlled = false;
    std::vector<std::string> warnings;
};

TripleReport solve_triple(const TripleSystem& sys, const SolveOptions& opt = {});

}  // namespace simfilm
