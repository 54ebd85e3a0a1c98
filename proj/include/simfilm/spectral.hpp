#pragma once

#include "simfilm/kernel.hpp"

#include <map>

namespace simfilm {

inline double to_double(double v) { return v; }
inline double to_double(const Rational& v) { return v.value(); }

/// Polynomial in N <= 2 variables: scale * sum_beta c_beta y^beta.
/// `scale` carries irrational normalizations (1/sqrt(beta!)) so that the
/// coefficients themselves can stay exact.
template <typename Coef>
struct Polynomial {
    int dim = 1;
    std::map<MultiIndex, Coef> terms;
    double scale = 1.0;

    int degree() const {
        int d = -1;
        for (const auto& [b, c] : terms)
            if (to_double(c) != 0.0) d = std::max(d, b.order());
        return d;
    }

    double coefficient(const MultiIndex& b) const {
        const auto it = terms.find(b);
        return it == terms.end() ? 0.0 : scale * to_double(it->second);
    }

    double operator()(double y1, double y2 = 0.0) const {
        double s = 0.0;
        for (const auto& [b, c] : terms) {
            double t = to_double(c);
            for (int i = 0; i < b[0]; ++i) t *= y1;
            if (dim > 1)
                for (int i = 0; i < b[1]; ++i) t *= y2;
            s += t;
        }
        return scale * s;
    }
};

using ExactPolynomial = Polynomial<Rational>;

/// Laplacian applied coefficient-wise.
ExactPolynomial laplacian(const ExactPolynomial& p);
/// y . grad p.
ExactPolynomial euler_operator(const ExactPolynomial& p);
ExactPolynomial add(const ExactPolynomial& a, const ExactPolynomial& b, Rational wb = 1);
Field sample(const GridSpec& grid, const ExactPolynomial& p);

/// lambda_beta = -|beta| / (2m).
Rational eigenvalue(const MultiIndex& beta, int order = 2);

/// psi_beta = ((-1)^{|beta|} / sqrt(beta!)) D^beta F on the grid.
Field eigenfunction(const KernelModel& model, const MultiIndex& beta, const GridSpec& grid);

/// psi*_beta = (1/sqrt(beta!)) sum_j ((-1)^{mj} / j!) Delta^{mj} y^beta.
ExactPolynomial adjoint_polynomial(const MultiIndex& beta, int order = 2);

/// B = -(-Delta)^m + (1/2m) y.grad + N/(2m), applied through the kernel
/// representation of the field. Fields without kernel terms are rejected.
Field apply_B(const KernelModel& model, const Field& field);

/// B* = -(-Delta)^m - (1/2m) y.grad, exact on coefficients.
ExactPolynomial apply_B_star(const ExactPolynomial& p, int order = 2);

struct EigenPairSet {
    int dim = 1;
    int order = 2;
    int max_order = 0;
    GridSpec grid;
    std::vector<MultiIndex> indices;
    std::vector<Field> eigenfunctions;
    std::vector<ExactPolynomial> adjoints;
    std::vector<Rational> eigenvalues;

    Eigen::Index index_of(const MultiIndex& beta) const;
};

/// All eigenpairs with |beta| <= K in graded-lex order.
EigenPairSet build_eigenpairs(const KernelModel& model, int K, const GridSpec& grid);

/// Duality pairing <psi_beta, psi*_gamma> for all listed pairs (rows beta, columns gamma).
Eigen::MatrixXd gram_matrix(const EigenPairSet& pairs);

struct GramReport {
    Eigen::MatrixXd gram;
    Eigen::MatrixXd refined;
    /// max |G - I| on the base grid and on the refined grid.
    double error = 0.0;
    double refined_error = 0.0;
    /// error / refined_error.
    double improvement = 0.0;
    /// Largest entry change between base and refined grids.
    double drift = 0.0;
    bool resolved = false;
};

/// Gram matrix on `grid` and on the grid with doubled cell count at the same
/// spacing; `resolved` when the drift stays below `tolerance`.
GramReport gram_check(const KernelModel& model, int K, const GridSpec& grid, double tolerance = 1e-6);

/// max |B psi_beta - lambda_beta psi_beta| over the grid.
double eigen_residual(const KernelModel& model, const MultiIndex& beta, const GridSpec& grid);

/// Default grid for Gram matrices: half-width 40, spacing 0.1.
GridSpec default_gram_grid(int dim);

}  // namespace simfilm
