#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "simfilm/semigroup.hpp"

#include <cmath>

using namespace simfilm;

namespace {

const KernelModel& k1() {
    static const KernelModel m = build_kernel(1, 2, 10);
    return m;
}

const EigenPairSet& pairs() {
    static const EigenPairSet s = build_eigenpairs(k1(), 10, default_gram_grid(1));
    return s;
}

}  // namespace

TEST_CASE("bump mass constant") {
    // Composite Gauss-Legendre oracle on (-1, 1).
    const GaussRule r = composite_gauss(-1.0, 1.0, 400, 16);
    const double oracle = (r.weights * (-1.0 / (1.0 - r.nodes.square())).exp()).sum();
    CHECK(std::abs(oracle - kBumpMass) < 1e-13);
    CHECK(std::abs(integrate(bump(default_data_grid(1))) - 1.0) < 1e-10);
}

TEST_CASE("bump derivatives agree with finite differences") {
    const GridSpec g = GridSpec::uniform(2.0, 4000);
    const Field b0 = bump(g), b1 = bump(g, 1), b2 = bump(g, 2);
    const double h = g.spacing;
    double e1 = 0.0, e2 = 0.0;
    for (Eigen::Index i = 2; i + 2 < g.size(); ++i) {
        const double d1 = (b0.values[i - 2] - 8 * b0.values[i - 1] + 8 * b0.values[i + 1] - b0.values[i + 2]) / (12 * h);
        const double d2 = (b1.values[i - 2] - 8 * b1.values[i - 1] + 8 * b1.values[i + 1] - b1.values[i + 2]) / (12 * h);
        e1 = std::max(e1, std::abs(d1 - b1.values[i]));
        e2 = std::max(e2, std::abs(d2 - b2.values[i]));
    }
    CHECK(e1 < 1e-6);
    CHECK(e2 < 1e-5);
}

TEST_CASE("moments") {
    const Field F = eval_kernel(k1(), default_gram_grid(1));
    CHECK(momentum(F, MultiIndex{0}) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(momentum(F, MultiIndex{1})) < 1e-10);

    const Field b = bump(default_data_grid(1));
    const Field fine = bump(GridSpec::uniform(2.0, 800));
    double direct = 0.0;
    for (Eigen::Index i = 0; i < fine.size(); ++i) direct += std::pow(fine.grid.axis(i), 2) * fine.values[i];
    direct *= fine.grid.spacing / std::sqrt(2.0);
    CHECK(std::abs(momentum(b, MultiIndex{2}) - direct) < 1e-10);

    const Field touching = sample(GridSpec::uniform(0.5, 100), [](double y, double) { return 1.0 + y; });
    CHECK_THROWS_AS(momentum(touching, MultiIndex{0}), Error);

    const MomentSet m = moments(b, 4, "bump");
    CHECK(m[MultiIndex{0}] == doctest::Approx(1.0));
    CHECK(std::abs(m[MultiIndex{3}]) < 1e-15);
}

TEST_CASE("expansion and convolution agree") {
    const Field u0 = bump(default_data_grid(1));
    for (double tau : {1.0, 2.0, 4.0}) {
        const Field e = evolve_expansion(pairs(), u0, tau, 8);
        const Field c = evolve_convolution(k1(), u0, tau, pairs().grid);
        const EvolutionComparison cmp = compare(e, c, tau, 8);
        CAPTURE(tau);
        CHECK(cmp.l2_error < 1e-4);
        CHECK(integrate(c) == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("convolution approaches the kernel") {
    const Field u0 = bump(default_data_grid(1));
    const Field F = eval_kernel(k1(), pairs().grid);
    const Field w = evolve_convolution(k1(), u0, 4.0 * std::log(10.0), pairs().grid);
    CHECK(l2_norm(combine(1.0, w, -1.0, F)) < 1e-3);
    const Field wf = evolve_convolution(k1(), u0, 60.0, pairs().grid);
    CHECK((wf.values - F.values).abs().maxCoeff() < 1e-6);
}

TEST_CASE("convolution is linear") {
    const Field u0 = bump(default_data_grid(1));
    const GridSpec out = GridSpec::uniform(10.0, 100);
    const Field a = evolve_convolution(k1(), u0, 1.5, out);
    const Field b = evolve_convolution(k1(), scaled(3.0, u0), 1.5, out);
    CHECK((b.values - 3.0 * a.values).abs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(evolve_convolution(k1(), u0, 0.0, out), Error);
}

TEST_CASE("truncation error decreases with K") {
    const Field u0 = bump(default_data_grid(1));
    const Field c = evolve_convolution(k1(), u0, 0.5, pairs().grid);
    double prev = INFINITY;
    for (int K = 0; K <= 10; K += 2) {
        const double err = compare(evolve_expansion(pairs(), u0, 0.5, K), c).l2_error;
        CAPTURE(K);
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("truncation remainder decays at the first omitted rate") {
    const Field u0 = bump(default_data_grid(1));
    std::vector<double> taus{1.0, 2.0, 3.0, 4.0}, errs;
    for (double tau : taus)
        errs.push_back(compare(evolve_expansion(pairs(), u0, tau, 4),
                               evolve_convolution(k1(), u0, tau, pairs().grid)).l2_error);
    // Odd moments of the bump vanish, so the first omitted level is 6.
    CHECK(log_slope(taus, errs) <= -5.0 / 4.0 + 0.05);
    CHECK(log_slope(taus, errs) == doctest::Approx(-6.0 / 4.0).epsilon(0.05));
}

TEST_CASE("mass-zero data decay at -j/4") {
    for (int j = 1; j <= 3; ++j) {
        const Field u0 = bump(GridSpec::uniform(2.0, 1600), j);
        CHECK(std::abs(integrate(u0)) < 1e-10);
        std::vector<double> taus{4.0, 6.0, 8.0, 10.0}, norms;
        for (double tau : taus) norms.push_back(l2_norm(evolve_convolution(k1(), u0, tau, pairs().grid)));
        const double per_order = log_slope(taus, norms) / j;
        CAPTURE(j);
        CHECK(std::abs(per_order + 0.25) < 0.05 * 0.25);
    }
}
