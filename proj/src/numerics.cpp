#include "simfilm/numerics.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <numbers>

namespace simfilm {

GaussRule gauss_legendre(int n) {
    if (n < 1) config_error("Gauss-Legendre order must be positive");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = b;
        J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    GaussRule rule;
    rule.nodes = es.eigenvalues().array();
    rule.weights = 2.0 * es.eigenvectors().row(0).transpose().array().square();
    // Polish nodes with Newton on P_n for full double accuracy.
    for (int i = 0; i < n; ++i) {
        double x = rule.nodes[i];
        double dp = 1.0;
        for (int it = 0; it < 3; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p1 = x, p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            x -= p1 / dp;
        }
        rule.nodes[i] = x;
        rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

GaussRule composite_gauss(double a, double b, int panels, int order) {
    if (panels < 1) config_error("composite rule needs at least one panel");
    const GaussRule base = gauss_legendre(order);
    GaussRule out;
    out.nodes.resize(panels * order);
    out.weights.resize(panels * order);
    const double w = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * w;
        out.nodes.segment(p * order, order) = lo + 0.5 * w * (base.nodes + 1.0);
        out.weights.segment(p * order, order) = 0.5 * w * base.weights;
    }
    return out;
}

namespace {

void bessel_asymptotic01(double x, double& j0, double& j1) {
    // Hankel expansion; terms are summed until they stop decreasing.
    const double inv8x = 1.0 / (8.0 * x);
    auto pq = [inv8x](double nu, double& P, double& Q) {
        static const std::array<double, 61> inv_k = [] {
            std::array<double, 61> t{};
            for (int k = 1; k < 61; ++k) t[static_cast<std::size_t>(k)] = 1.0 / k;
            return t;
        }();
        const double mu = 4.0 * nu * nu;
        P = 1.0;
        Q = 0.0;
        double term = 1.0;
        double last = 1e300;
        for (int k = 1; k < 60; ++k) {
            const double odd = 2.0 * k - 1.0;
            term *= (mu - odd * odd) * inv8x * inv_k[static_cast<std::size_t>(k)];
            const double mag = std::abs(term);
            if (mag > last) break;
            last = mag;
            if (k % 2 == 1) {
                Q += (k % 4 == 1 ? 1.0 : -1.0) * term;
            } else {
                P += (k % 4 == 2 ? -1.0 : 1.0) * term;
            }
            if (mag < 1e-18) break;
        }
    };
    double P0, Q0, P1, Q1;
    pq(0.0, P0, Q0);
    pq(1.0, P1, Q1);
    const double s = std::sin(x), c = std::cos(x);
    const double amp = std::sqrt(2.0 / (std::numbers::pi * x));
    const double r2 = std::numbers::sqrt2 / 2.0;
    const double c0 = (c + s) * r2, s0 = (s - c) * r2;
    const double c1 = (s - c) * r2, s1 = -(s + c) * r2;
    j0 = amp * (P0 * c0 - Q0 * s0);
    j1 = amp * (P1 * c1 - Q1 * s1);
}

}  // namespace

void bessel_j_sequence(double x, int kmax, double* out) {
    if (x < 0.0) numerical_error("bessel_j_sequence needs x >= 0");
    if (x == 0.0) {
        out[0] = 1.0;
        for (int k = 1; k <= kmax; ++k) out[k] = 0.0;
        return;
    }
    if (x >= 20.0 && kmax < x) {
        double j0, j1;
        bessel_asymptotic01(x, j0, j1);
        out[0] = j0;
        if (kmax >= 1) out[1] = j1;
        const double tx = 2.0 / x;
        for (int k = 1; k < kmax; ++k) out[k + 1] = (k * tx) * out[k] - out[k - 1];
        return;
    }
    // Miller's downward recurrence normalized by J0 + 2 sum J_{2k} = 1.
    const int reach = std::max(kmax, static_cast<int>(x) + 1);
    int start = reach + 16 + static_cast<int>(std::sqrt(40.0 * reach));
    start += start % 2;
    const double tx = 2.0 / x;
    double jp1 = 0.0, j = 1e-30, norm = 0.0;
    for (int k = start; k >= 1; --k) {
        const double jm1 = (k * tx) * j - jp1;
        jp1 = j;
        j = jm1;
        const int idx = k - 1;
        if (idx <= kmax) out[idx] = j;
        if (idx > 0 && idx % 2 == 0) norm += 2.0 * j;
        if (std::abs(j) > 1e250) {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            for (int q = idx; q <= kmax; ++q)
                if (q >= 0) out[q] *= 1e-250;
        }
    }
    norm += j;
    for (int k = 0; k <= kmax; ++k) out[k] /= norm;
}

double integrate(const Field& f) {
    const GridSpec& g = f.grid;
    const Eigen::Index n = g.axis_count();
    if (g.kind == GridKind::Uniform1D) {
        double s = f.values.sum() - 0.5 * (f.values[0] + f.values[n - 1]);
        return s * g.spacing;
    }
    if (g.kind == GridKind::Tensor2D) {
        const auto m = f.as_grid();
        Eigen::ArrayXd w = Eigen::ArrayXd::Ones(n);
        w[0] = w[n - 1] = 0.5;
        const double s = (w.matrix().transpose() * m.matrix() * w.matrix())(0, 0);
        return s * g.spacing * g.spacing;
    }
    config_error("integration is defined on uniform-1d and tensor-2d grids only");
}

Eigen::ArrayXd trapezoid_weights(const GridSpec& g) {
    const Eigen::Index n = g.axis_count();
    Eigen::ArrayXd w = Eigen::ArrayXd::Ones(n);
    w[0] = w[n - 1] = 0.5;
    if (g.kind == GridKind::Uniform1D) return w * g.spacing;
    if (g.kind != GridKind::Tensor2D) config_error("integration is defined on uniform-1d and tensor-2d grids only");
    Eigen::ArrayXd out(n * n);
    for (Eigen::Index i = 0; i < n; ++i) out.segment(i * n, n) = w[i] * w * (g.spacing * g.spacing);
    return out;
}

double inner(const Field& a, const Field& b) {
    require_same_grid(a, b);
    return integrate(Field(a.grid, a.values * b.values));
}

double integrate_with(const Field& f, const std::function<double(double, double)>& g) {
    Eigen::ArrayXd v(f.size());
    for (Eigen::Index p = 0; p < f.size(); ++p) {
        const auto y = f.grid.point(p);
        v[p] = f.values[p] * g(y[0], y[1]);
    }
    return integrate(Field(f.grid, std::move(v)));
}

double l2_norm(const Field& f) { return std::sqrt(std::max(0.0, inner(f, f))); }

Field sample(const GridSpec& grid, const std::function<double(double, double)>& fn) {
    Eigen::ArrayXd v(grid.size());
    for (Eigen::Index p = 0; p < v.size(); ++p) {
        const auto y = grid.point(p);
        v[p] = fn(y[0], y[1]);
    }
    return Field(grid, std::move(v));
}

std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) numerical_error("line fit needs at least two points");
    Eigen::MatrixXd A(x.size(), 2);
    Eigen::VectorXd b(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        A(static_cast<Eigen::Index>(i), 0) = 1.0;
        A(static_cast<Eigen::Index>(i), 1) = x[i];
        b[static_cast<Eigen::Index>(i)] = y[i];
    }
    const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
    return {c[0], c[1]};
}

}  // namespace simfilm
