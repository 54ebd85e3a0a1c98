#pragma once

#include "simfilm/spectral.hpp"

#include <string>

namespace simfilm {

struct MomentSet {
    std::vector<MultiIndex> indices;
    std::vector<double> values;
    std::string source;

    double operator[](const MultiIndex& beta) const;
};

/// M_beta(u0) = (1/sqrt(beta!)) int z^beta u0(z) dz.
/// Errors when u0 does not vanish on the grid boundary.
double momentum(const Field& u0, const MultiIndex& beta);
MomentSet moments(const Field& u0, int K, std::string source = {});

/// w(y, tau) = sum_{|beta| <= K} e^{lambda_beta tau} M_beta(u0) psi_beta(y) on pairs.grid.
Field evolve_expansion(const EigenPairSet& pairs, const Field& u0, double tau, int K);

/// w(y, tau) = int F(y - z e^{-tau/2m}) u0(z) dz by direct quadrature over the support of u0.
Field evolve_convolution(const KernelModel& model, const Field& u0, double tau, const GridSpec& out);

struct EvolutionComparison {
    double tau = 0.0;
    int truncation = 0;
    double l2_error = 0.0;
    double linf_error = 0.0;
};

EvolutionComparison compare(const Field& expansion, const Field& convolution, double tau = 0.0, int K = 0);

/// Smooth compact bump exp(-1/(1-z^2)) (radial in 2D) and its j-th derivative
/// along y1; the plain bump is normalized to unit mass.
Field bump(const GridSpec& grid, int derivative = 0);

/// Integral of exp(-1/(1-z^2)) over (-1, 1).
inline constexpr double kBumpMass = 0.4439938161680793;

/// Slope of log(values) against tau by least squares.
double log_slope(const std::vector<double>& taus, const std::vector<double>& values);

/// Default data grid: |z| <= 2, spacing 0.01.
GridSpec default_data_grid(int dim);

}  // namespace simfilm
