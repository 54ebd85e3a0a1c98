#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "simfilm/spectral.hpp"

#include <cmath>
#include <numbers>

using namespace simfilm;

namespace {

const KernelModel& k1() {
    static const KernelModel m = build_kernel(1, 2, 10);
    return m;
}

// Probabilists' Hermite polynomial He_k by recurrence.
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

}  // namespace

TEST_CASE("eigenvalues") {
    CHECK(eigenvalue(MultiIndex{0}) == Rational(0));
    CHECK(eigenvalue(MultiIndex{1, 1}) == Rational(-1, 2));
    CHECK(eigenvalue(MultiIndex{4}) == Rational(-1));
    CHECK(eigenvalue(MultiIndex{3}, 1) == Rational(-3, 2));
}

TEST_CASE("adjoint polynomials") {
    const auto p0 = adjoint_polynomial(MultiIndex{0});
    CHECK(p0.degree() == 0);
    CHECK(p0(3.7) == doctest::Approx(1.0));
    const auto p2 = adjoint_polynomial(MultiIndex{2});
    CHECK(p2.terms.size() == 1);
    CHECK(p2.coefficient(MultiIndex{2}) == doctest::Approx(1.0 / std::sqrt(2.0)));
    const auto p4 = adjoint_polynomial(MultiIndex{4});
    CHECK(p4.coefficient(MultiIndex{4}) == doctest::Approx(1.0 / std::sqrt(24.0)));
    CHECK(p4.coefficient(MultiIndex{0}) == doctest::Approx(24.0 / std::sqrt(24.0)));
    // 2D: Delta^2 (y1^2 y2^2) = 8.
    const auto q = adjoint_polynomial(MultiIndex{2, 2});
    CHECK(q.terms.at(MultiIndex{0, 0}) == Rational(8));
    CHECK(q.degree() == 4);
}

TEST_CASE("adjoint eigenrelation holds exactly") {
    for (int m : {1, 2})
        for (int dim : {1, 2})
            for (const auto& b : multi_indices_upto(dim, 8)) {
                const auto p = adjoint_polynomial(b, m);
                const auto Bp = apply_B_star(p, m);
                const auto expect = add(Bp, p, -eigenvalue(b, m));
                CAPTURE(b.str());
                CHECK(expect.terms.empty());
                CHECK(p.degree() == b.order());
                CHECK(p.coefficient(b) == doctest::Approx(1.0 / std::sqrt(static_cast<double>(b.factorial()))));
            }
    ExactPolynomial one;
    one.terms[MultiIndex{0}] = Rational(1);
    CHECK(apply_B_star(one).terms.empty());
}

TEST_CASE("gaussian eigenfunctions are Hermite functions") {
    const KernelModel m1 = build_kernel(1, 1, 6);
    const GridSpec g = GridSpec::uniform(12.0, 240);
    for (int k = 0; k <= 4; ++k) {
        const Field psi = eigenfunction(m1, MultiIndex{k}, g);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            const double y = g.axis(i);
            const double F = std::exp(-y * y / 4.0) / (2.0 * std::sqrt(std::numbers::pi));
            const double oracle = std::pow(2.0, -k / 2.0) * hermite_he(k, y / std::sqrt(2.0)) * F /
                                  std::sqrt(std::tgamma(k + 1.0));
            worst = std::max(worst, std::abs(psi.values[i] - oracle));
        }
        CAPTURE(k);
        CHECK(worst < 1e-10);
    }
    const Field psi1 = eigenfunction(m1, MultiIndex{1}, g);
    const Field F = eval_kernel(m1, g);
    for (Eigen::Index i : {30L, 120L, 200L})
        CHECK(psi1.values[i] == doctest::Approx(g.axis(i) / 2.0 * F.values[i]).epsilon(1e-9));
}

TEST_CASE("B annihilates the kernel and has the stated eigenvalues") {
    const GridSpec g = GridSpec::uniform(8.0, 320);
    CHECK(apply_B(k1(), eval_kernel(k1(), g)).values.abs().maxCoeff() < 1e-10);
    for (int k = 0; k <= 4; ++k) CHECK(eigen_residual(k1(), MultiIndex{k}, g) < 1e-9);
    const Field plain(g, Eigen::ArrayXd::Ones(g.size()));
    CHECK_THROWS_AS(apply_B(k1(), plain), Error);
}

TEST_CASE("two-dimensional eigen-residuals") {
    const KernelModel m2 = build_kernel(2, 2, 7, {.radial_extent = 15.0});
    const GridSpec g = GridSpec::tensor(8.0, 64);
    for (const auto& b : multi_indices_upto(2, 3)) {
        CAPTURE(b.str());
        CHECK(eigen_residual(m2, b, g) < 1e-8);
    }
}

TEST_CASE("moments of eigenfunctions vanish") {
    const auto s = build_eigenpairs(k1(), 4, default_gram_grid(1));
    CHECK(integrate(s.eigenfunctions[0]) == doctest::Approx(1.0).epsilon(1e-10));
    for (std::size_t i = 1; i < s.indices.size(); ++i) CHECK(std::abs(integrate(s.eigenfunctions[i])) < 1e-8);
}

TEST_CASE("bi-orthonormality, bi-harmonic case") {
    const GramReport r = gram_check(k1(), 4, default_gram_grid(1));
    CHECK(r.error < 1e-6);
    CHECK(r.improvement >= 10.0);
    CHECK(r.gram(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("bi-orthonormality, Hermite case") {
    const KernelModel m1 = build_kernel(1, 1, 4);
    const auto s = build_eigenpairs(m1, 4, default_gram_grid(1));
    const Eigen::MatrixXd G = gram_matrix(s);
    CHECK((G - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("two-dimensional Gram matrix") {
    const KernelModel m2 = build_kernel(2, 2, 2, {.radial_extent = 45.0});
    const auto s = build_eigenpairs(m2, 2, GridSpec::tensor(30.0, 300));
    const Eigen::MatrixXd G = gram_matrix(s);
    CHECK((G - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-5);
}
