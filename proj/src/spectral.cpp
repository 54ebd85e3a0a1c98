#include "simfilm/spectral.hpp"

#include <cmath>

namespace simfilm {

namespace {

MultiIndex shifted(const MultiIndex& b, int axis, int by) {
    MultiIndex r = b;
    r.c[static_cast<std::size_t>(axis)] += by;
    return r;
}

std::int64_t binomial(int n, int k) {
    std::int64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

ExactPolynomial laplacian(const ExactPolynomial& p) {
    ExactPolynomial out;
    out.dim = p.dim;
    out.scale = p.scale;
    for (const auto& [b, c] : p.terms)
        for (int i = 0; i < p.dim; ++i) {
            const int e = b[i];
            if (e < 2) continue;
            MultiIndex nb = shifted(b, i, -2);
            out.terms[nb] += c * Rational(e * (e - 1));
        }
    std::erase_if(out.terms, [](const auto& kv) { return kv.second.is_zero(); });
    return out;
}

ExactPolynomial euler_operator(const ExactPolynomial& p) {
    ExactPolynomial out = p;
    for (auto& [b, c] : out.terms) c *= Rational(b.order());
    std::erase_if(out.terms, [](const auto& kv) { return kv.second.is_zero(); });
    return out;
}

ExactPolynomial add(const ExactPolynomial& a, const ExactPolynomial& b, Rational wb) {
    if (a.dim != b.dim) config_error("polynomials of different dimension");
    if (a.scale != b.scale) config_error("polynomials with different scale factors cannot be added exactly");
    ExactPolynomial out = a;
    for (const auto& [m, c] : b.terms) out.terms[m] += c * wb;
    std::erase_if(out.terms, [](const auto& kv) { return kv.second.is_zero(); });
    return out;
}

Field sample(const GridSpec& grid, const ExactPolynomial& p) {
    return sample(grid, [&p](double y1, double y2) { return p(y1, y2); });
}

Rational eigenvalue(const MultiIndex& beta, int order) { return Rational(-beta.order(), 2 * order); }

Field eigenfunction(const KernelModel& model, const MultiIndex& beta, const GridSpec& grid) {
    const double s = (beta.order() % 2 ? -1.0 : 1.0) / std::sqrt(static_cast<double>(beta.factorial()));
    return scaled(s, eval_derivative(model, beta, grid));
}

ExactPolynomial adjoint_polynomial(const MultiIndex& beta, int order) {
    ExactPolynomial mono;
    mono.dim = beta.dim;
    mono.terms[beta] = Rational(1);
    ExactPolynomial out = mono;
    ExactPolynomial cur = mono;
    std::int64_t jfact = 1;
    for (int j = 1; order * j <= beta.order(); ++j) {
        for (int q = 0; q < order; ++q) cur = laplacian(cur);
        jfact *= j;
        const Rational w((order * j) % 2 ? -1 : 1, jfact);
        out = add(out, cur, w);
    }
    out.scale = 1.0 / std::sqrt(static_cast<double>(beta.factorial()));
    return out;
}

Field apply_B(const KernelModel& model, const Field& field) {
    if (!field.has_terms()) config_error("apply_B needs a field with kernel-derivative metadata");
    const int N = field.dim();
    const int m = model.order;
    // -(-Delta)^m = (-1)^{m+1} sum_a C(m,a) d1^{2a} d2^{2(m-a)}
    std::vector<MultiIndex> betas;
    std::vector<double> coefs;
    std::vector<int> kind;  // 0 plain, 1 times y1, 2 times y2
    const double sgn = m % 2 ? 1.0 : -1.0;
    for (const auto& [b, c] : field.terms) {
        if (N == 1) {
            betas.push_back(shifted(b, 0, 2 * m));
            coefs.push_back(sgn * c);
            kind.push_back(0);
        } else {
            for (int a = 0; a <= m; ++a) {
                betas.push_back(shifted(shifted(b, 0, 2 * a), 1, 2 * (m - a)));
                coefs.push_back(sgn * c * static_cast<double>(binomial(m, a)));
                kind.push_back(0);
            }
        }
        for (int i = 0; i < N; ++i) {
            betas.push_back(shifted(b, i, 1));
            coefs.push_back(c / (2.0 * m));
            kind.push_back(1 + i);
        }
        betas.push_back(b);
        coefs.push_back(c * N / (2.0 * m));
        kind.push_back(0);
    }
    const auto vals = eval_derivatives(model, betas, field.grid);
    Eigen::ArrayXd y1(field.size()), y2(field.size());
    for (Eigen::Index p = 0; p < field.size(); ++p) {
        const auto y = field.grid.point(p);
        y1[p] = y[0];
        y2[p] = y[1];
    }
    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(field.size());
    for (std::size_t q = 0; q < betas.size(); ++q) {
        if (kind[q] == 0) out += coefs[q] * vals[q].values;
        else if (kind[q] == 1) out += coefs[q] * y1 * vals[q].values;
        else out += coefs[q] * y2 * vals[q].values;
    }
    return Field(field.grid, std::move(out));
}

ExactPolynomial apply_B_star(const ExactPolynomial& p, int order) {
    ExactPolynomial lap = p;
    for (int q = 0; q < order; ++q) lap = laplacian(lap);
    // -(-Delta)^m: sign (-1)^{m+1}
    ExactPolynomial out = euler_operator(p);
    for (auto& entry : out.terms) entry.second = entry.second * Rational(-1, 2 * order);
    return add(out, lap, Rational(order % 2 ? 1 : -1));
}

Eigen::Index EigenPairSet::index_of(const MultiIndex& beta) const {
    for (std::size_t i = 0; i < indices.size(); ++i)
        if (indices[i] == beta) return static_cast<Eigen::Index>(i);
    config_error("multi-index " + beta.str() + " not in the eigenpair set");
}

EigenPairSet build_eigenpairs(const KernelModel& model, int K, const GridSpec& grid) {
    if (K < 0) config_error("truncation order must be non-negative");
    if (K > model.max_deriv) config_error("truncation order exceeds the kernel's max_deriv");
    if (grid.dim() != model.dim && !(model.dim == 2 && grid.kind == GridKind::Radial))
        config_error("grid dimension does not match the kernel");
    EigenPairSet s;
    s.dim = model.dim;
    s.order = model.order;
    s.max_order = K;
    s.grid = grid;
    s.indices = multi_indices_upto(model.dim, K);
    const auto raw = eval_derivatives(model, s.indices, grid);
    for (std::size_t i = 0; i < s.indices.size(); ++i) {
        const MultiIndex& b = s.indices[i];
        const double f = (b.order() % 2 ? -1.0 : 1.0) / std::sqrt(static_cast<double>(b.factorial()));
        s.eigenfunctions.push_back(scaled(f, raw[i]));
        s.adjoints.push_back(adjoint_polynomial(b, model.order));
        s.eigenvalues.push_back(eigenvalue(b, model.order));
    }
    return s;
}

Eigen::MatrixXd gram_matrix(const EigenPairSet& pairs) {
    const auto n = static_cast<Eigen::Index>(pairs.indices.size());
    std::vector<Field> star;
    for (const auto& p : pairs.adjoints) star.push_back(sample(pairs.grid, p));
    Eigen::MatrixXd G(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            G(i, j) = inner(pairs.eigenfunctions[static_cast<std::size_t>(i)], star[static_cast<std::size_t>(j)]);
    return G;
}

GramReport gram_check(const KernelModel& model, int K, const GridSpec& grid, double tolerance) {
    GramReport r;
    r.gram = gram_matrix(build_eigenpairs(model, K, grid));
    GridSpec wide = grid;
    wide.half_width = 2.0 * grid.half_width;
    r.refined = gram_matrix(build_eigenpairs(model, K, wide));
    const auto I = Eigen::MatrixXd::Identity(r.gram.rows(), r.gram.cols());
    r.error = (r.gram - I).cwiseAbs().maxCoeff();
    r.refined_error = (r.refined - I).cwiseAbs().maxCoeff();
    r.improvement = r.refined_error > 0 ? r.error / r.refined_error : INFINITY;
    r.drift = (r.gram - r.refined).cwiseAbs().maxCoeff();
    r.resolved = r.drift <= tolerance;
    return r;
}

double eigen_residual(const KernelModel& model, const MultiIndex& beta, const GridSpec& grid) {
    const Field psi = eigenfunction(model, beta, grid);
    const Field Bpsi = apply_B(model, psi);
    return (Bpsi.values - eigenvalue(beta, model.order).value() * psi.values).abs().maxCoeff();
}

GridSpec default_gram_grid(int dim) {
    return dim == 1 ? GridSpec::uniform(40.0, 800) : GridSpec::tensor(40.0, 800);
}

}  // namespace simfilm
