#pragma once

#include "simfilm/core.hpp"
#include "simfilm/numerics.hpp"

#include <complex>
#include <memory>

namespace simfilm {

struct KernelOptions {
    /// Largest radius covered by the N=2 radial tables (0 selects the default).
    double radial_extent = 0.0;
    /// Spacing of the N=2 radial tables.
    double radial_spacing = 1e-3;
    /// Largest |y| accepted by point evaluation in 1D (0 selects the default).
    double eval_extent = 0.0;
};

/// Angular expansion of D^beta F in N=2:
/// D^beta F(r, phi) = sum_k Re(a_k e^{i k phi}) G_{k,|beta|}(r), k >= 0.
struct AngularTerm {
    int k;
    std::complex<double> a;
};

struct RadialTables {
    double spacing = 0.0;
    double extent = 0.0;
    int max_order = 0;
    /// tables[p][k] holds G_{k,p}; entries with k of the wrong parity are empty.
    std::vector<std::vector<RadialTable<double>>> tables;
};

/// Trapezoid weights of the 1D frequency integral on horizontal lines
/// Im xi = eta_l = l * eta_step; weights[l][j] belongs to xi = j*dx + i eta_l
/// and includes e^{-xi^{2m}} and 1/pi. Line l = 0 is the real axis.
struct LineContours {
    double dx = 0.0;
    double eta_step = 0.0;
    /// Beyond this |y| the kernel underflows; the top line is used.
    double y_cap = 0.0;
    std::vector<Eigen::ArrayXcd> weights;
};

/// Quadrature representation of the rescaled kernel
/// F(y) = (2 pi)^{-N} int e^{i y.xi} e^{-|xi|^{2m}} d xi and its derivatives.
/// Immutable after construction; copies share the radial tables.
struct KernelModel {
    int dim = 1;
    int order = 2;
    double freq_cutoff = 4.0;
    int node_count = 2048;
    int max_deriv = 8;
    /// Frequency nodes and weights; weights include e^{-xi^{2m}}, the
    /// normalization 1/pi (N=1) or s/(2 pi) (N=2) and the quadrature weight.
    Eigen::ArrayXd freq_nodes;
    Eigen::ArrayXd freq_weights;
    double eval_extent = 0.0;
    std::shared_ptr<const RadialTables> radial;
    std::shared_ptr<const LineContours> line;
};

double default_freq_cutoff(int order);
int default_node_count(int dim);
double default_radial_extent();

KernelModel build_kernel(int dim, int order, double freq_cutoff, int node_count, int max_deriv,
                         const KernelOptions& options = {});
/// Model with default cutoff and node count.
KernelModel build_kernel(int dim, int order, int max_deriv, const KernelOptions& options = {});

/// D^beta F at a single point (y2 ignored for N=1).
double kernel_derivative(const KernelModel& model, const MultiIndex& beta, double y1, double y2 = 0.0);

/// D^p F(y) for p = 0..max_order at one point of the line (N=1 only).
void kernel_derivatives_1d(const KernelModel& model, double y, int max_order, double* out);

/// Angular expansion coefficients of D^beta F (N=2).
std::vector<AngularTerm> angular_terms(const MultiIndex& beta);

Field eval_kernel(const KernelModel& model, const GridSpec& grid);
Field eval_derivative(const KernelModel& model, const MultiIndex& beta, const GridSpec& grid);
/// Several derivatives on one grid; shares per-point work.
std::vector<Field> eval_derivatives(const KernelModel& model, const std::vector<MultiIndex>& betas,
                                    const GridSpec& grid);

/// sum_k coef_k D^{beta_k} F on the grid; the result keeps the terms.
Field eval_terms(const KernelModel& model, const KernelTerms& terms, const GridSpec& grid);

/// Terms of d/dy_axis applied `by` times.
KernelTerms shift_terms(const KernelTerms& terms, int axis, int by = 1);

/// d field / dy_axis through the kernel representation of the field.
Field differentiate(const KernelModel& model, const Field& field, int axis);

/// Tabulates D^p F on [0, extent] for p = 0..max_order (N=1) for fast repeated
/// evaluation at arbitrary points; parity (-1)^p.
std::vector<RadialTable<double>> tabulate_line(const KernelModel& model, int max_order, double extent,
                                               double spacing = 1e-3);

struct EnvelopeOptions {
    double exponent = 4.0 / 3.0;
    double alternative_exponent = 2.0;
    /// Only |y| >= tail_start enters the fit.
    double tail_start = 5.0;
    /// Samples below floor * max|f| are treated as round-off and ignored.
    double floor = 1e-13;
};

struct EnvelopeReport {
    double fitted_D = 0.0;
    double fitted_d = 0.0;
    /// Largest violation of log|f| <= log D - d |y|^a over the tail (>= 0).
    double residual = 0.0;
    /// RMS misfit of the log-extrema under the primary law.
    double fit_rms = 0.0;
    double alternative_d = 0.0;
    double alternative_rms = 0.0;
    /// True when the alternative exponent fits the tail better.
    bool law_mismatch = false;
    bool oscillatory = true;
    int extrema_used = 0;
};

EnvelopeReport check_decay_envelope(const Field& field, const EnvelopeOptions& options = {});

}  // namespace simfilm
