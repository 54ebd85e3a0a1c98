#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "simfilm/kernel.hpp"

#include <cmath>
#include <numbers>

using namespace simfilm;

namespace {

const KernelModel& k1() {
    static const KernelModel m = build_kernel(1, 2, 8);
    return m;
}

const KernelModel& k2() {
    static const KernelModel m = build_kernel(2, 2, 4, {.radial_extent = 45.0});
    return m;
}

}  // namespace

TEST_CASE("bessel sequence matches std::cyl_bessel_j") {
    double worst = 0.0;
    double out[9];
    for (double x = 0.01; x < 200.0; x *= 1.07) {
        bessel_j_sequence(x, 8, out);
        for (int k = 0; k <= 8; ++k)
            worst = std::max(worst, std::abs(out[k] - std::cyl_bessel_j(static_cast<double>(k), x)));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
    const GaussRule r = gauss_legendre(16);
    CHECK(r.weights.sum() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK((r.weights * r.nodes.pow(30)).sum() == doctest::Approx(2.0 / 31.0).epsilon(1e-14));
}

TEST_CASE("kernel value at the origin") {
    // F(0) = Gamma(1 + 1/2m) / pi in 1D and Gamma(1 + 1/m) / (4 pi) in 2D.
    CHECK(kernel_derivative(k1(), MultiIndex{0}, 0.0) == doctest::Approx(std::tgamma(1.25) / std::numbers::pi).epsilon(1e-12));
    CHECK(kernel_derivative(k2(), MultiIndex{0, 0}, 0.0, 0.0) ==
          doctest::Approx(1.0 / (8.0 * std::sqrt(std::numbers::pi))).epsilon(1e-10));
}

TEST_CASE("second order kernel is the heat kernel") {
    const KernelModel m1 = build_kernel(1, 1, 4);
    for (double y : {0.0, 0.7, 2.5, -3.1, 6.0}) {
        const double g = std::exp(-y * y / 4.0) / (2.0 * std::sqrt(std::numbers::pi));
        CHECK(kernel_derivative(m1, MultiIndex{0}, y) == doctest::Approx(g).epsilon(1e-12));
        CHECK(kernel_derivative(m1, MultiIndex{1}, y) == doctest::Approx(-y / 2.0 * g).epsilon(1e-11));
        CHECK(kernel_derivative(m1, MultiIndex{2}, y) == doctest::Approx((y * y / 4.0 - 0.5) * g).epsilon(1e-11));
    }
    const KernelModel m2 = build_kernel(2, 1, 2, {.radial_extent = 20.0});
    for (auto [a, b] : {std::pair{0.3, -1.2}, std::pair{2.0, 1.5}, std::pair{-0.4, 3.3}}) {
        const double g = std::exp(-(a * a + b * b) / 4.0) / (4.0 * std::numbers::pi);
        CHECK(kernel_derivative(m2, MultiIndex{0, 0}, a, b) == doctest::Approx(g).epsilon(1e-10));
        CHECK(kernel_derivative(m2, MultiIndex{1, 1}, a, b) == doctest::Approx(a * b / 4.0 * g).epsilon(1e-9));
        CHECK(kernel_derivative(m2, MultiIndex{0, 2}, a, b) == doctest::Approx((b * b / 4.0 - 0.5) * g).epsilon(1e-9));
    }
}

TEST_CASE("bi-harmonic kernel satisfies F''' = y F / 4") {
    double d[9];
    for (double y = -12.0; y <= 12.0; y += 0.37) {
        kernel_derivatives_1d(k1(), y, 3, d);
        CHECK(std::abs(d[3] - y * d[0] / 4.0) < 1e-13);
    }
}

TEST_CASE("kernel tails keep relative accuracy") {
    double d[9];
    for (double y : {35.0, 52.5, 70.25, 95.0}) {
        kernel_derivatives_1d(k1(), y, 3, d);
        CAPTURE(y);
        CHECK(d[0] != 0.0);
        CHECK(std::abs(d[3] - y * d[0] / 4.0) <= 1e-9 * std::abs(y * d[0] / 4.0));
    }
}

TEST_CASE("two-dimensional kernel satisfies grad Laplacian F = y F / 4") {
    for (auto [a, b] : {std::pair{0.5, 0.2}, std::pair{-1.7, 2.4}, std::pair{3.0, -4.0}, std::pair{0.0, 6.5}}) {
        const double f = kernel_derivative(k2(), MultiIndex{0, 0}, a, b);
        const double g1 = kernel_derivative(k2(), MultiIndex{3, 0}, a, b) + kernel_derivative(k2(), MultiIndex{1, 2}, a, b);
        const double g2 = kernel_derivative(k2(), MultiIndex{2, 1}, a, b) + kernel_derivative(k2(), MultiIndex{0, 3}, a, b);
        CHECK(std::abs(g1 - a * f / 4.0) < 1e-11);
        CHECK(std::abs(g2 - b * f / 4.0) < 1e-11);
    }
}

TEST_CASE("two-dimensional derivatives agree with finite differences") {
    const double h = 1e-3;
    for (auto [a, b] : {std::pair{0.9, -0.3}, std::pair{2.2, 1.1}}) {
        auto F = [&](double x, double y) { return kernel_derivative(k2(), MultiIndex{0, 0}, x, y); };
        const double fd1 = (F(a - 2 * h, b) - 8 * F(a - h, b) + 8 * F(a + h, b) - F(a + 2 * h, b)) / (12 * h);
        const double fd2 = (F(a, b - 2 * h) - 8 * F(a, b - h) + 8 * F(a, b + h) - F(a, b + 2 * h)) / (12 * h);
        CHECK(kernel_derivative(k2(), MultiIndex{1, 0}, a, b) == doctest::Approx(fd1).epsilon(1e-7));
        CHECK(kernel_derivative(k2(), MultiIndex{0, 1}, a, b) == doctest::Approx(fd2).epsilon(1e-7));
    }
}

TEST_CASE("angular expansion of first derivatives") {
    const auto t = angular_terms(MultiIndex{1, 0});
    REQUIRE(t.size() == 1);
    CHECK(t[0].k == 1);
    CHECK(t[0].a.real() == doctest::Approx(-1.0));
    CHECK(std::abs(t[0].a.imag()) < 1e-15);
    const auto s = angular_terms(MultiIndex{0, 1});
    REQUIRE(s.size() == 1);
    CHECK(s[0].a.imag() == doctest::Approx(1.0));
}

TEST_CASE("kernel parity") {
    for (int p = 0; p <= 5; ++p) {
        const double a = kernel_derivative(k1(), MultiIndex{p}, 2.3);
        const double b = kernel_derivative(k1(), MultiIndex{p}, -2.3);
        CHECK(b == doctest::Approx((p % 2 ? -1.0 : 1.0) * a).epsilon(1e-14));
    }
}

TEST_CASE("first zeros of the bi-harmonic kernel") {
    auto F = [](double y) { return kernel_derivative(k1(), MultiIndex{0}, y); };
    const double frozen[] = {3.4531, 6.7838, 9.6349};
    int found = 0;
    double prev = F(0.0);
    for (double y = 0.01; y < 10.5 && found < 3; y += 0.01) {
        const double cur = F(y);
        if (prev * cur < 0) {
            double lo = y - 0.01, hi = y;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                (F(lo) * F(mid) <= 0 ? hi : lo) = mid;
            }
            CHECK(0.5 * (lo + hi) == doctest::Approx(frozen[found]).epsilon(1e-4));
            ++found;
        }
        prev = cur;
    }
    CHECK(found == 3);
}

TEST_CASE("grid evaluation matches point evaluation") {
    const GridSpec g = GridSpec::tensor(10.0, 40);
    const Field f = eval_derivative(k2(), MultiIndex{1, 1}, g);
    REQUIRE(f.terms.size() == 1);
    for (Eigen::Index p : {0L, 17L, 840L, 1680L}) {
        const auto y = g.point(p);
        CHECK(f.values[p] == doctest::Approx(kernel_derivative(k2(), MultiIndex{1, 1}, y[0], y[1])).epsilon(1e-14));
    }
}

TEST_CASE("line tables reproduce direct evaluation") {
    const auto tab = tabulate_line(k1(), 2, 20.0);
    for (double y : {-13.3333, -1.0, 0.00051, 7.77}) {
        CHECK(std::abs(tab[0](y) - kernel_derivative(k1(), MultiIndex{0}, y)) < 1e-13);
        CHECK(std::abs(tab[1](y) - kernel_derivative(k1(), MultiIndex{1}, y)) < 1e-13);
    }
    CHECK_THROWS_AS(tab[0](25.0), Error);
}

TEST_CASE("decay envelope of the bi-harmonic kernel") {
    const GridSpec g = GridSpec::uniform(30.0, 3000);
    const EnvelopeReport r = check_decay_envelope(eval_kernel(k1(), g));
    CHECK(r.oscillatory);
    CHECK(r.extrema_used >= 3);
    // d = 3 * 2^{-11/3} from the saddle point of the Fourier integral.
    const double d = 3.0 * std::pow(2.0, -11.0 / 3.0);
    CHECK(std::abs(r.fitted_d - d) < 0.05 * d);
    CHECK_FALSE(r.law_mismatch);
}

TEST_CASE("decay envelope flags a gaussian tail") {
    const GridSpec g = GridSpec::uniform(30.0, 3000);
    const Field f = sample(g, [](double y, double) { return std::exp(-y * y / 4.0); });
    const EnvelopeReport r = check_decay_envelope(f);
    CHECK_FALSE(r.oscillatory);
    CHECK(r.law_mismatch);
    CHECK(r.alternative_d == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("configuration errors") {
    CHECK_THROWS_AS(build_kernel(3, 2, 2), Error);
    CHECK_THROWS_AS(build_kernel(1, 2, 3.0, 2048, 2), Error);
    CHECK_THROWS_AS(build_kernel(1, 2, 4.0, 100, 2), Error);
    CHECK_THROWS_AS(kernel_derivative(k1(), MultiIndex{9}, 0.0), Error);
    CHECK_THROWS_AS(kernel_derivative(k2(), MultiIndex{0, 0}, 40.0, 40.0), Error);
}
