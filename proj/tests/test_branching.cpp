#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "simfilm/branching.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace simfilm;

namespace {

const KernelModel& k2() {
    static const KernelModel m = build_kernel(2, 2, 8);
    return m;
}

const EigenPairSet& pairs2() {
    static const EigenPairSet s = build_eigenpairs(k2(), 2, default_branch_grid());
    return s;
}

const EigenPairSet& coarse_pairs() {
    static const EigenPairSet p = build_eigenpairs(k2(), 2, GridSpec::tensor(36.0, 600));
    return p;
}

const LevelData& level(int k) {
    static const LevelData l1 = assemble_level(k2(), pairs2(), 1, SingularQuadConfig{});
    static const LevelData l2 = assemble_level(k2(), pairs2(), 2, SingularQuadConfig{});
    return k == 1 ? l1 : l2;
}

Field constant(const GridSpec& g, double v) {
    return sample(g, [v](double, double) { return v; });
}

// int_{-1}^{1} ln|y^2 + a| dy in closed form.
double inner_log(double a) {
    if (a > 0) return 2 * (std::log(1 + a) - 2 + 2 * std::sqrt(a) * std::atan(1 / std::sqrt(a)));
    if (a == 0) return -4.0;
    const double b = std::sqrt(-a);
    return 2 * ((1 - b) * std::log(1 - b) + (1 + b) * std::log(1 + b) - 2);
}

// Level data with random projections and log terms given by a fixed smooth map of c.
LevelData synthetic_level(int k, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    LevelData l;
    l.level = k;
    l.alpha = (2.0 + k) / 4.0;
    l.basis = multi_indices(2, k);
    const auto M = static_cast<Eigen::Index>(l.basis.size());
    l.projections = Eigen::MatrixXd::NullaryExpr(M, M, [&]() { return u(rng); });
    l.self_projection = u(rng);
    std::vector<double> w;
    for (Eigen::Index i = 0; i < 3 * M; ++i) w.push_back(u(rng));
    l.log_terms = [w](const std::vector<double>& c) {
        std::vector<SingularEstimate> out(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
            double s = w[3 * i];
            for (std::size_t j = 0; j < c.size(); ++j) s += w[3 * i + 1] * std::sin(c[j] + w[3 * i + 2] * static_cast<double>(j));
            out[i].value = s;
        }
        return out;
    };
    return l;
}

// G_i = Omega_i + c_i mu - (alpha/4) sum_j I_ij c_j.
std::vector<double> raw_equations(const LevelData& l, const std::vector<double>& c, double mu) {
    const auto om = l.log_terms(c);
    std::vector<double> G;
    for (std::size_t i = 0; i < c.size(); ++i) {
        double g = om[i].value + c[i] * mu;
        for (std::size_t j = 0; j < c.size(); ++j)
            g -= l.alpha / 4.0 * l.projections(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * c[j];
        G.push_back(g);
    }
    return G;
}

ConicCoeffs random_conic(std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
}

// Conic through four points plus a random member of the remaining pencil.
std::array<ConicCoeffs, 2> pencil(const std::array<std::array<double, 2>, 4>& pts, std::mt19937& rng) {
    Eigen::Matrix<double, 4, 6> M;
    for (int r = 0; r < 4; ++r) {
        const double x = pts[static_cast<std::size_t>(r)][0], y = pts[static_cast<std::size_t>(r)][1];
        M.row(r) << x * x, y * y, x, y, x * y, 1.0;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    const Eigen::VectorXd n1 = svd.matrixV().col(4), n2 = svd.matrixV().col(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::array<ConicCoeffs, 2> out;
    for (auto& q : out) {
        const Eigen::VectorXd v = u(rng) * n1 + u(rng) * n2;
        q = {v[0], v[1], v[2], v[3], v[4], v[5]};
    }
    return out;
}

// Intersections found by sign changes on a grid, refined by Newton.
std::vector<std::array<double, 2>> grid_scan(const ConicCoeffs& p, const ConicCoeffs& q, double lo, double hi, int n) {
    std::vector<std::array<double, 2>> out;
    const double h = (hi - lo) / n;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double x0 = lo + a * h, y0 = lo + b * h;
            auto changes = [&](const ConicCoeffs& f) {
                const double v[4] = {f(x0, y0), f(x0 + h, y0), f(x0, y0 + h), f(x0 + h, y0 + h)};
                return *std::min_element(v, v + 4) <= 0 && *std::max_element(v, v + 4) >= 0;
            };
            if (!changes(p) || !changes(q)) continue;
            double x = x0 + h / 2, y = y0 + h / 2;
            for (int it = 0; it < 50; ++it) {
                const double f = p(x, y), g = q(x, y);
                const double a11 = 2 * p.A * x + p.C + p.E * y, a12 = 2 * p.B * y + p.D + p.E * x;
                const double a21 = 2 * q.A * x + q.C + q.E * y, a22 = 2 * q.B * y + q.D + q.E * x;
                const double det = a11 * a22 - a12 * a21;
                x -= (f * a22 - g * a12) / det;
                y -= (a11 * g - a21 * f) / det;
            }
            if (std::abs(p(x, y)) > 1e-12 || std::abs(q(x, y)) > 1e-12) continue;
            if (std::none_of(out.begin(), out.end(), [&](const auto& z) { return std::hypot(z[0] - x, z[1] - y) < 1e-8; }))
                out.push_back({x, y});
        }
    return out;
}

double nearest(const std::vector<std::array<double, 2>>& set, const std::array<double, 2>& p) {
    double d = INFINITY;
    for (const auto& z : set) d = std::min(d, std::hypot(z[0] - p[0], z[1] - p[1]));
    return d;
}

}  // namespace

TEST_CASE("singular quadrature: 1D model integrand") {
    const GridSpec g = GridSpec::uniform(1.0, 2000);
    const Field one = constant(g, 1.0);
    const Field y = sample(g, [](double x, double) { return x; });
    const SingularEstimate e = singular_quadrature({one}, y, {one}, SingularQuadConfig{});
    CHECK(std::abs(e.value + 2.0) < 1e-6);
    CHECK(e.levels.size() == 3);
}

TEST_CASE("singular quadrature: trivial cases") {
    const GridSpec g = GridSpec::uniform(1.0, 400);
    const Field one = constant(g, 1.0);
    const Field shifted = sample(g, [](double x, double) { return 5.0 + x; });
    const SingularQuadConfig cfg;
    const SingularEstimate e = singular_quadrature({one}, shifted, {one}, cfg);
    // No zeros: the trapezoid sum on the finest level.
    double plain = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) plain += (i == 0 || i == g.size() - 1 ? 0.5 : 1.0) * std::log(5.0 + g.axis(i));
    plain *= g.spacing;
    CHECK(e.value == doctest::Approx(plain).epsilon(1e-15));
    CHECK(e.error == 0.0);

    const Field y = sample(g, [](double x, double) { return x; });
    CHECK(singular_inner_product({constant(g, 0.0)}, y, {one}, cfg) == 0.0);
}

TEST_CASE("singular quadrature: 2D crossing lines and circle") {
    const GridSpec g = GridSpec::tensor(1.0, 400);
    const Field one = constant(g, 1.0), zero = constant(g, 0.0);
    const SingularQuadConfig cfg;
    const Field xy = sample(g, [](double a, double b) { return a * b; });
    CHECK(std::abs(singular_inner_product({one, zero}, xy, {one, zero}, cfg) + 8.0) < 5e-4);

    // Outer integral of the closed-form inner integral, split at the nodal radius.
    double oracle = 0.0;
    // x = 1/2 -+ t^2 on either side of the nodal radius.
    for (auto [sgn, top] : {std::pair{-1.0, std::sqrt(0.5)}, std::pair{1.0, std::sqrt(0.5)}}) {
        const GaussRule r = composite_gauss(0.0, top, 200, 16);
        for (Eigen::Index i = 0; i < r.nodes.size(); ++i) {
            const double t = r.nodes[i], x = 0.5 + sgn * t * t;
            oracle += 2 * r.weights[i] * 2 * t * inner_log(x * x - 0.25);
        }
    }
    CHECK(oracle == doctest::Approx(-4.9045195194137797).epsilon(1e-9));
    const Field circle = sample(g, [](double a, double b) { return a * a + b * b - 0.25; });
    CHECK(std::abs(singular_inner_product({one, zero}, circle, {one, zero}, cfg) - oracle) < 5e-4);
}

TEST_CASE("singular quadrature: failures") {
    const GridSpec g = GridSpec::uniform(1.0, 400);
    const Field one = constant(g, 1.0);
    Field alt = constant(g, 1.0);
    for (Eigen::Index i = 0; i < g.size(); i += 2) alt.values[i] = -1.0;
    CHECK_THROWS_AS(check_transversal(alt), Error);
    CHECK_THROWS_AS(singular_quadrature({one}, alt, {one}, SingularQuadConfig{}), Error);

    const GridSpec g2 = GridSpec::tensor(1.0, 60);
    Field checker = constant(g2, 1.0);
    for (Eigen::Index p = 0; p < g2.size(); ++p)
        if (((p / g2.axis_count()) + (p % g2.axis_count())) % 2) checker.values[p] = -1.0;
    CHECK_THROWS_AS(check_transversal(checker), Error);
    CHECK_NOTHROW(check_transversal(sample(g2, [](double a, double b) { return a * b; })));

    const Field y = sample(g, [](double x, double) { return x; });
    CHECK_THROWS_AS(singular_quadrature({one}, y, {one}, SingularQuadConfig{2.0, 6, 16.0}), Error);
    CHECK_THROWS_AS(singular_quadrature({one}, y, {one}, SingularQuadConfig{2.0, 5, 30.0}), Error);
    CHECK_THROWS_AS(singular_quadrature({one}, y, {one}, SingularQuadConfig{2.0, 1, 16.0}), Error);
    CHECK_THROWS_AS(singular_quadrature({one}, y, {one}, SingularQuadConfig{0.0, 3, 16.0}), Error);

    // A weight alternating at the grid scale: refinement never settles.
    Field alt_weight = constant(g, 1.0);
    for (Eigen::Index i = 1; i < g.size(); i += 2) alt_weight.values[i] = -1.0;
    CHECK_THROWS_AS(singular_quadrature({alt_weight}, y, {one}, SingularQuadConfig{}), Error);
}

TEST_CASE("mu_{1,0} reproduces the exact mass law") {
    for (int N : {1, 2}) {
        const KernelModel m = N == 1 ? build_kernel(1, 2, 8) : k2();
        const EigenPairSet p = N == 1 ? build_eigenpairs(m, 1, default_gram_grid(1)) : pairs2();
        const double mu = assemble_k0(m, p, SingularQuadConfig{});
        const double ref = -N * N / 16.0;
        CAPTURE(N);
        CHECK(std::abs(mu - ref) / std::abs(ref) < 0.02);
        const double n = 0.05;
        CHECK(std::abs(N / 4.0 + n * mu - N / (4.0 + N * n)) < 5e-4);
    }
}

TEST_CASE("level-1 projections: swap symmetry and refinement") {
    const Eigen::MatrixXd& I = level(1).projections;
    CHECK(std::abs(I(0, 0) - I(1, 1)) < 1e-10);
    CHECK(std::abs(I(0, 1) - I(1, 0)) < 1e-10);
    CHECK(I(0, 0) == doctest::Approx(-3.0).epsilon(1e-8));

    const DipoleSystem a = dipole_from_level(level(1));
    const DipoleSystem b = assemble_dipole(k2(), coarse_pairs(), SingularQuadConfig{});
    CHECK(std::abs(a.A - b.A) < 1e-4);
    CHECK(std::abs(a.B - b.B) < 1e-4);
    CHECK(std::abs(a.C - b.C) < 1e-4);
    CHECK(std::abs(a.nondegeneracy - b.nondegeneracy) < 1e-4);
    CHECK(a.nondegeneracy == doctest::Approx(-3.0).epsilon(1e-8));
    CHECK(a.alpha1 == 0.75);
    CHECK(a.A_printed == -a.A);
}

TEST_CASE("dipole log term matches the radial oracle") {
    // Polar reduction of Omega_1 at c2 = 0, evaluated with adaptive quadrature in s and r.
    const double oracle = 0.12973173884180766;
    const auto om = level(1).log_terms({1.0, 0.0});
    CHECK(std::abs(om[0].value - oracle) < 2e-5);
    CHECK(std::abs(om[0].value - oracle) <= om[0].error);
    CHECK(std::abs(om[1].value) < 1e-12);
    const DipoleSystem d = dipole_from_level(level(1));
    CHECK(d.mu(0.0) == doctest::Approx(-oracle - 0.5625).epsilon(1e-3));
}

TEST_CASE("dipole equation is the mu-free combination of the raw system") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const LevelData l = synthetic_level(1, rng);
        const DipoleSystem s = dipole_from_level(l);
        for (double c2 : {0.0, 0.3, 0.85}) {
            const std::vector<double> c{1.0 - c2, c2};
            const auto G = raw_equations(l, c, 0.0);
            const double lhs = (s.A * c2 + s.B) * c2 + s.C + s.omega(c2).value;
            CHECK(lhs == doctest::Approx(c[0] * G[1] - c[1] * G[0]).epsilon(1e-12));
            const auto Gm = raw_equations(l, c, s.mu(c2));
            CHECK(std::abs(Gm[0] + Gm[1]) < 1e-12);
        }
    }
}

TEST_CASE("dipole solver on quadratics") {
    const DipoleReport two = solve_dipole(dipole_from_coefficients(1.0, -1.0, 3.0 / 16.0));
    REQUIRE(two.solutions.size() == 2);
    CHECK(two.solutions[0].coefficients.at(MultiIndex{0, 1}) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(two.solutions[1].coefficients.at(MultiIndex{0, 1}) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(two.root_count == 2);
    CHECK(two.predicts_two);
    for (const auto& s : two.solutions) {
        CHECK(s.coefficients.at(MultiIndex{1, 0}) + s.coefficients.at(MultiIndex{0, 1}) == 1.0);
        CHECK(s.residual < 1e-8);
    }

    const DipoleReport dbl = solve_dipole(dipole_from_coefficients(1.0, -2.0, 1.0));
    REQUIRE(dbl.solutions.size() == 1);
    CHECK(dbl.solutions[0].coefficients.at(MultiIndex{0, 1}) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(!dbl.predicts_two);

    const DipoleReport linear = solve_dipole(dipole_from_coefficients(0.0, 2.0, -1.0));
    REQUIRE(linear.solutions.size() == 1);
    CHECK(linear.solutions[0].coefficients.at(MultiIndex{0, 1}) == doctest::Approx(0.5));
    CHECK(!linear.warnings.empty());

    CHECK(solve_dipole(dipole_from_coefficients(1.0, 0.0, 1.0)).root_count == 0);
    DipoleSystem flat = dipole_from_coefficients(1.0, -1.0, 0.1);
    flat.nondegeneracy = 0.0;
    CHECK_THROWS_AS(solve_dipole(flat), Error);
}

TEST_CASE("dipole roots map to 1 - c2 under the coordinate swap") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int trial = 0; trial < 50; ++trial) {
        const double r1 = u(rng), r2 = u(rng), A = 0.5 + u(rng);
        const double B = -A * (r1 + r2), C = A * r1 * r2;
        const DipoleReport a = solve_dipole(dipole_from_coefficients(A, B, C));
        const DipoleReport b = solve_dipole(dipole_from_coefficients(A, -(2 * A + B), A + B + C));
        REQUIRE(a.solutions.size() == b.solutions.size());
        const std::size_t n = a.solutions.size();
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(a.solutions[i].coefficients.at(MultiIndex{0, 1}) +
                           b.solutions[n - 1 - i].coefficients.at(MultiIndex{0, 1}) - 1.0) < 1e-8);
        CHECK(a.predicts_two);
        CHECK(a.root_count == 2);
    }
}

TEST_CASE("assembled dipole: degenerate quadratic, continuum of roots") {
    const DipoleSystem d = dipole_from_level(level(1));
    CHECK(std::abs(d.A) < 1e-10);
    CHECK(std::abs(d.B) < 1e-10);
    CHECK(std::abs(d.C) < 1e-10);
    SolveOptions opt;
    opt.lattice = 11;
    const DipoleReport r = solve_dipole(d, opt);
    CHECK(r.continuum);
    CHECK(r.root_count == -1);
    CHECK(!r.predicts_two);
    REQUIRE(r.solutions.size() == 11);
    std::vector<double> roots;
    for (const auto& s : r.solutions) roots.push_back(s.coefficients.at(MultiIndex{0, 1}));
    for (double c : roots) {
        double best = INFINITY;
        for (double e : roots) best = std::min(best, std::abs(1.0 - c - e));
        CHECK(best < 1e-8);
    }
    for (const auto& s : r.solutions) CHECK(std::abs(s.mu_first - r.solutions[0].mu_first) < 1e-4);
}

TEST_CASE("triple coefficients") {
    const TripleSystem t = triple_from_level(level(2));
    const Eigen::MatrixXd& I = t.projections;
    CHECK(t.alpha2 == 1.0);
    CHECK(t.nondegeneracy == doctest::Approx(16.0).epsilon(1e-8));
    CHECK(std::abs(t.coeffs[0].C) < 1e-8);
    CHECK(t.C1_printed == doctest::Approx(2.0).epsilon(1e-8));
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(I(i, i) == doctest::Approx(-4.0).epsilon(1e-8));

    // psi^_1 <-> psi^_3 relabels the projections onto themselves.
    Eigen::Matrix3d P = Eigen::Matrix3d::Zero();
    P(0, 2) = P(1, 1) = P(2, 0) = 1.0;
    CHECK((P * I * P - I).cwiseAbs().maxCoeff() < 1e-10);

    // C2 = (alpha/4) <psi^_3*, y.grad psi^_1> on a grid with a different spacing.
    const EigenPairSet other = build_eigenpairs(k2(), 2, GridSpec::tensor(40.0, 1000));
    const LevelData lo = assemble_level(k2(), other, 2, SingularQuadConfig{});
    CHECK(std::abs(t.coeffs[1].C - lo.alpha / 4.0 * lo.projections(2, 0)) < 1e-8);
    const TripleSystem u = triple_from_level(lo);
    for (int k = 0; k < 2; ++k) {
        const ConicCoeffs &a = t.coeffs[static_cast<std::size_t>(k)], &b = u.coeffs[static_cast<std::size_t>(k)];
        CHECK(std::abs(a.A - b.A) + std::abs(a.B - b.B) + std::abs(a.C - b.C) + std::abs(a.D - b.D) +
                  std::abs(a.E - b.E) < 1e-3);
    }
}

TEST_CASE("triple equations are mu-free combinations of the raw system") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const LevelData l = synthetic_level(2, rng);
        const TripleSystem s = triple_from_level(l);
        for (int p = 0; p < 5; ++p) {
            const double c2 = u(rng), c3 = u(rng);
            const std::vector<double> c{1.0 - c2 - c3, c2, c3};
            const auto G = raw_equations(l, c, 0.0);
            const auto om = s.omega(c2, c3);
            const double e1 = (c3 - c2) * G[0] + c[0] * (G[1] - G[2]);
            const double e2 = c3 * G[1] - c2 * G[2];
            CHECK(s.coeffs[0](c2, c3) + om[0].value == doctest::Approx(e1).epsilon(1e-12));
            CHECK(s.coeffs[1](c2, c3) + om[1].value == doctest::Approx(e2).epsilon(1e-12));
            bool fallback = true;
            const auto Gm = raw_equations(l, c, s.mu(c2, c3, fallback));
            CHECK(!fallback);
            CHECK(std::abs(Gm[1] - Gm[2]) < 1e-10);
        }
        bool fallback = false;
        s.mu(0.3, 0.3, fallback);
        CHECK(fallback);
    }
}

TEST_CASE("conic classification") {
    CHECK(classify_conic({1, 1, 0, 0, 0, -1}).kind == ConicKind::Circle);
    CHECK(classify_conic({1, -1, 0, 0, 0, -1}).kind == ConicKind::Hyperbola);
    CHECK(classify_conic({1, 0, 0, 1, 0, 0}).kind == ConicKind::Parabola);
    CHECK(classify_conic({1, 1, 0, 0, 2, 0}).kind == ConicKind::Parabola);
    CHECK(classify_conic({1, 2, 0, 0, 0, -1}).kind == ConicKind::Ellipse);
    CHECK(classify_conic({1, 1, 0, 0, 0, 1}).empty);
    CHECK(classify_conic({0, 0, 1, 1, 0, 0}).kind == ConicKind::Degenerate);
    CHECK(classify_conic({1, -1, 0, 0, 0, 0}).degenerate);
    CHECK(!classify_conic({1, -1, 0, 0, 0, -1}).degenerate);
    CHECK(to_string(ConicKind::Hyperbola) == "hyperbola");

    std::mt19937 rng(5);
    int agree = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const ConicCoeffs q = random_conic(rng);
        bool pos = false, neg = false;
        for (int a = 0; a < 100; ++a)
            for (int b = 0; b < 100; ++b) {
                const double x = -1 + 2.0 * a / 99, y = -1 + 2.0 * b / 99;
                const double v = q.A * x * x + q.B * y * y + q.E * x * y;
                pos = pos || v > 0;
                neg = neg || v < 0;
            }
        const ConicClass c = classify_conic(q);
        const bool hyperbola = pos && neg;
        agree += hyperbola == (c.kind == ConicKind::Hyperbola) &&
                 (hyperbola || c.kind == ConicKind::Ellipse || c.kind == ConicKind::Circle);
        CHECK(c.discriminant == doctest::Approx(q.E * q.E - 4 * q.A * q.B));
    }
    CHECK(agree == 1000);
}

TEST_CASE("conic intersection: hand cases") {
    const ConicIntersection a = intersect_conics({1, 1, 0, 0, 0, -1}, {0, 0, 1, -1, 0, 0});
    REQUIRE(a.points.size() == 2);
    for (const auto& p : a.points) CHECK(std::abs(std::abs(p[0]) - std::sqrt(0.5)) < 1e-12);
    const TripleReport r = solve_triple(triple_from_conics({1, 1, 0, 0, 0, -1}, {0, 0, 1, -1, 0, 0}));
    REQUIRE(r.root_count == 1);
    CHECK(r.solutions[0].coefficients.at(MultiIndex{1, 1}) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(r.solutions[0].coefficients.at(MultiIndex{2, 0}) == doctest::Approx(1 - std::sqrt(2.0)).epsilon(1e-12));

    CHECK(intersect_conics({1, 1, 0, 0, 0, -1}, {1, 1, 0, 0, 0, -4}).points.empty());
    CHECK(solve_triple(triple_from_conics({1, 1, 0, 0, 0, -1}, {1, 1, 0, 0, 0, -4})).root_count == 0);
    CHECK(intersect_conics({1, 1, 0, 0, 0, -1}, {2, 2, 0, 0, 0, -2}).infinite);
}

TEST_CASE("conic intersection: pencil oracle") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::array<std::array<double, 2>, 4> pts;
        for (auto& p : pts) p = {u(rng), u(rng)};
        const auto [p, q] = pencil(pts, rng);
        const ConicIntersection cut = intersect_conics(p, q);
        CAPTURE(trial);
        CHECK(cut.points.size() == 4);
        for (const auto& z : pts) CHECK(nearest(cut.points, z) < 1e-10);
    }
}

TEST_CASE("conic intersection: grid scan oracle") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const ConicCoeffs p = random_conic(rng), q = random_conic(rng);
        const ConicIntersection cut = intersect_conics(p, q);
        CAPTURE(trial);
        CHECK(cut.points.size() <= 4);
        const auto scan = grid_scan(p, q, -3.0, 3.0, 300);
        for (const auto& z : scan) CHECK(nearest(cut.points, z) < 1e-10);
        for (const auto& z : cut.points)
            if (std::abs(z[0]) < 2.9 && std::abs(z[1]) < 2.9) CHECK(nearest(scan, z) < 1e-10);
    }
}

TEST_CASE("assembled triple: roots lie on rotation orbits") {
    SolveOptions opt;
    opt.triple_lattice = 6;
    const TripleReport r = solve_triple(triple_from_level(assemble_level(k2(), coarse_pairs(), 2, SingularQuadConfig{})), opt);
    REQUIRE(!r.solutions.empty());
    for (const auto& s : r.solutions) {
        double sum = 0.0;
        for (const auto& [b, c] : s.coefficients) sum += c;
        CHECK(std::abs(sum - 1.0) < 1e-12);
        CHECK(s.residual < 1e-8);
    }
    CHECK(r.continuum);
    CHECK(r.root_count == -1);
}
