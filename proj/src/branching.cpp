#include "simfilm/branching.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <tuple>

namespace simfilm {

namespace {

ExactPolynomial partial(const ExactPolynomial& p, int axis) {
    ExactPolynomial out;
    out.dim = p.dim;
    out.scale = p.scale;
    for (const auto& [b, c] : p.terms) {
        const int e = b[axis];
        if (e == 0) continue;
        MultiIndex nb = b;
        nb.c[static_cast<std::size_t>(axis)] -= 1;
        out.terms[nb] += c * Rational(e);
    }
    return out;
}

double line_derivative(const double* v, Eigen::Index stride, Eigen::Index n, Eigen::Index k, double h) {
    auto at = [&](Eigen::Index q) { return v[q * stride]; };
    if (k >= 2 && k + 2 < n) return (at(k - 2) - 8 * at(k - 1) + 8 * at(k + 1) - at(k + 2)) / (12 * h);
    if (k >= 1 && k + 1 < n) return (at(k + 1) - at(k - 1)) / (2 * h);
    if (k == 0) return (-3 * at(0) + 4 * at(1) - at(2)) / (2 * h);
    return (3 * at(n - 1) - 4 * at(n - 2) + at(n - 3)) / (2 * h);
}

// int_0^1 ln|a + b s| ds and int_0^1 s ln|a + b s| ds.
std::pair<double, double> cell_log(double a, double b) {
    if (std::abs(b) <= 0.25 * std::abs(a)) {
        const double r = b / a, la = std::log(std::abs(a));
        double j0 = 0.0, j1 = 0.0, rk = 1.0;
        for (int k = 1; k <= 40 && std::abs(rk) > 1e-17; ++k) {
            rk *= r;
            const double t = k % 2 ? rk : -rk;
            j0 += t / (k * (k + 1.0));
            j1 += t / (k * (k + 2.0));
        }
        return {la + j0, 0.5 * la + j1};
    }
    auto G = [](double u) { return u == 0.0 ? 0.0 : u * std::log(std::abs(u)) - u; };
    auto H = [](double u) { return u == 0.0 ? 0.0 : 0.5 * u * u * std::log(std::abs(u)) - 0.25 * u * u; };
    const double u = a + b;
    return {(G(u) - G(a)) / b, ((H(u) - H(a)) - a * (G(u) - G(a))) / (b * b)};
}

// Line rule for int g ln|f| along one grid line with m intervals. f and g are linear on
// each interval; intervals whose interpolant vanishes within `band` intervals of them are
// integrated in closed form, the rest by the trapezoid rule.
void line_rule(const double* f, Eigen::Index fstride, const std::vector<const double*>& g, Eigen::Index gstride,
               Eigen::Index m, double band, double scale, std::vector<double>& acc, bool& any_band) {
    for (Eigen::Index k = 0; k < m; ++k) {
        const double a = f[k * fstride], b = f[(k + 1) * fstride] - a;
        if (a == 0.0 && b == 0.0) continue;
        double i0, i1;
        const bool near = b != 0.0 && -a / b > -band && -a / b < 1.0 + band;  // band in intervals
        if (near) {
            std::tie(i0, i1) = cell_log(a, b);
            any_band = true;
        } else {
            const double l0 = std::log(std::abs(a)), l1 = std::log(std::abs(a + b));
            i0 = 0.5 * (l0 + l1);
            i1 = 0.5 * l1;
        }
        for (std::size_t q = 0; q < g.size(); ++q) {
            const double g0 = g[q][k * gstride], g1 = g[q][(k + 1) * gstride];
            acc[q] += scale * (g0 * i0 + (g1 - g0) * i1);
        }
    }
}

std::vector<double> sign_changes(const double* v, Eigen::Index stride, Eigen::Index n, double cut) {
    std::vector<double> pos;
    int last = 0;
    Eigen::Index last_k = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double x = v[k * stride];
        if (std::abs(x) <= cut) continue;
        const int s = x > 0 ? 1 : -1;
        if (last != 0 && s != last) pos.push_back(0.5 * static_cast<double>(k + last_k));
        last = s;
        last_k = k;
    }
    return pos;
}

// Marks cells covered by three sign changes within fewer than 3 cells.
void mark_clusters(const std::vector<double>& pos, Eigen::Index n, std::vector<char>& bad, Eigen::Index offset,
                   Eigen::Index stride) {
    for (std::size_t k = 0; k + 2 < pos.size(); ++k)
        if (pos[k + 2] - pos[k] < 3.0)
            for (auto q = static_cast<Eigen::Index>(std::floor(pos[k]));
                 q <= static_cast<Eigen::Index>(std::ceil(pos[k + 2])) && q < n; ++q)
                bad[static_cast<std::size_t>(offset + q * stride)] = 1;
}

std::pair<double, double> quadratic_roots(double a, double b, double c, bool& real) {
    const double disc = b * b - 4 * a * c;
    real = disc >= 0;
    if (!real) return {0.0, 0.0};
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    if (q == 0.0) return {0.0, 0.0};
    return {q / a, c / q};
}

using Poly = std::vector<double>;

Poly padd(const Poly& a, const Poly& b, double sb = 1.0) {
    Poly out(std::max(a.size(), b.size()), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) out[i] += sb * b[i];
    return out;
}

Poly pmul(const Poly& a, const Poly& b) {
    if (a.empty() || b.empty()) return {};
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

double peval(const Poly& p, double x) {
    double s = 0.0;
    for (std::size_t k = p.size(); k-- > 0;) s = s * x + p[k];
    return s;
}

double pmax(const Poly& p) {
    double m = 0.0;
    for (double c : p) m = std::max(m, std::abs(c));
    return m;
}

// Real roots of a polynomial by the companion matrix, polished by Newton.
std::vector<double> real_roots(Poly p) {
    const double scale = pmax(p);
    if (scale == 0.0) return {};
    while (!p.empty() && std::abs(p.back()) <= 1e-13 * scale) p.pop_back();
    if (p.size() <= 1) return {};
    const auto deg = static_cast<Eigen::Index>(p.size() - 1);
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
    for (Eigen::Index i = 0; i < deg; ++i) comp(0, i) = -p[static_cast<std::size_t>(deg - 1 - i)] / p.back();
    for (Eigen::Index i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(comp, false).eigenvalues();
    Poly dp;
    for (std::size_t k = 1; k < p.size(); ++k) dp.push_back(static_cast<double>(k) * p[k]);
    std::vector<double> out;
    for (const auto& z : ev) {
        if (std::abs(z.imag()) > 1e-5 * (1.0 + std::abs(z.real()))) continue;
        double x = z.real();
        for (int it = 0; it < 8; ++it) {
            const double d = peval(dp, x);
            if (d == 0.0) break;
            const double step = peval(p, x) / d;
            if (!std::isfinite(step) || std::abs(step) > 1e-3 * (1.0 + std::abs(x))) break;
            x -= step;
        }
        out.push_back(x);
    }
    return out;
}

// Coefficients of the conic as a polynomial in y: {p0(x), p1(x), p2}.
std::array<Poly, 3> in_y(const ConicCoeffs& q) {
    return {Poly{q.F, q.C, q.A}, Poly{q.D, q.E}, Poly{q.B}};
}

int degree_in_y(const std::array<Poly, 3>& p, double tiny) {
    if (std::abs(p[2][0]) > tiny) return 2;
    if (pmax(p[1]) > tiny) return 1;
    return 0;
}

double conic_scale(const ConicCoeffs& q) {
    return std::max({std::abs(q.A), std::abs(q.B), std::abs(q.C), std::abs(q.D), std::abs(q.E), std::abs(q.F)});
}

bool polish(const ConicCoeffs& p, const ConicCoeffs& q, double& x, double& y) {
    for (int it = 0; it < 30; ++it) {
        const double f = p(x, y), g = q(x, y);
        const double a11 = 2 * p.A * x + p.C + p.E * y, a12 = 2 * p.B * y + p.D + p.E * x;
        const double a21 = 2 * q.A * x + q.C + q.E * y, a22 = 2 * q.B * y + q.D + q.E * x;
        const double det = a11 * a22 - a12 * a21;
        if (det == 0.0 || !std::isfinite(det)) break;
        const double dx = (f * a22 - g * a12) / det, dy = (a11 * g - a21 * f) / det;
        x -= dx;
        y -= dy;
        if (std::abs(dx) + std::abs(dy) < 1e-15 * (1.0 + std::abs(x) + std::abs(y))) break;
    }
    const double tol = 1e-9 * (1.0 + x * x + y * y);
    return std::abs(p(x, y)) <= tol * conic_scale(p) && std::abs(q(x, y)) <= tol * conic_scale(q);
}

void push_unique(std::vector<std::array<double, 2>>& pts, double x, double y, double tol) {
    for (const auto& p : pts)
        if (std::abs(p[0] - x) + std::abs(p[1] - y) < tol) return;
    pts.push_back({x, y});
}

std::vector<double> y_candidates(const std::array<Poly, 3>& p, double x) {
    const double a = peval(p[2], x), b = peval(p[1], x), c = peval(p[0], x);
    const double s = std::max({std::abs(a), std::abs(b), std::abs(c)});
    if (s == 0.0) return {};
    if (std::abs(a) > 1e-12 * s) {
        bool real = false;
        const double disc = b * b - 4 * a * c;
        if (disc < 0 && disc > -1e-8 * b * b) return {-b / (2 * a)};
        const auto r = quadratic_roots(a, b, c, real);
        if (!real) return {};
        return {r.first, r.second};
    }
    if (std::abs(b) > 1e-12 * s) return {-c / b};
    return {};
}

struct LevelFields {
    GridSpec grid;
    std::vector<Eigen::ArrayXd> psi;
    std::vector<std::vector<Eigen::ArrayXd>> flux;
    std::vector<std::vector<Eigen::ArrayXd>> weight;
    SingularQuadConfig cfg;
    std::vector<double> last_c;
    std::vector<SingularEstimate> last;
};

BranchSolution make_solution(int level, const std::vector<MultiIndex>& basis, const std::vector<double>& c) {
    BranchSolution s;
    s.level = level;
    for (std::size_t j = 0; j < basis.size(); ++j) s.coefficients[basis[j]] = c[j];
    return s;
}

}  // namespace

void check_transversal(const Field& f) {
    const GridSpec& g = f.grid;
    const double cut = 1e-13 * f.values.abs().maxCoeff();
    const Eigen::Index n = g.axis_count();
    if (g.kind == GridKind::Uniform1D) {
        const auto pos = sign_changes(f.values.data(), 1, n, cut);
        for (std::size_t k = 1; k < pos.size(); ++k)
            if (pos[k] - pos[k - 1] < 3.0)
                invariant_error("sign changes of the log argument are not isolated near y = " +
                                std::to_string(g.axis(static_cast<Eigen::Index>(pos[k]))));
        return;
    }
    if (g.kind != GridKind::Tensor2D) config_error("singular quadrature needs a uniform-1d or tensor-2d grid");
    std::vector<char> row(static_cast<std::size_t>(f.size()), 0), col(row);
    for (Eigen::Index i = 0; i < n; ++i) {
        mark_clusters(sign_changes(f.values.data() + i * n, 1, n, cut), n, row, i * n, 1);
        mark_clusters(sign_changes(f.values.data() + i, n, n, cut), n, col, i, n);
    }
    for (std::size_t p = 0; p < row.size(); ++p)
        if (row[p] && col[p]) {
            const auto y = g.point(static_cast<Eigen::Index>(p));
            invariant_error("sign changes of the log argument are not isolated near (" + std::to_string(y[0]) + ", " +
                            std::to_string(y[1]) + ")");
        }
}

std::vector<SingularEstimate> log_moments(const std::vector<Eigen::ArrayXd>& integrands, const Field& log_arg,
                                          const SingularQuadConfig& cfg) {
    if (cfg.extrapolation_levels < 2) config_error("singular quadrature needs at least two extrapolation levels");
    if (!(cfg.exclusion_radius > 0)) config_error("exclusion radius must be positive");
    const GridSpec& g = log_arg.grid;
    if (g.kind != GridKind::Uniform1D && g.kind != GridKind::Tensor2D)
        config_error("singular quadrature needs a uniform-1d or tensor-2d grid");
    const int L = cfg.extrapolation_levels;
    const Eigen::Index n = g.axis_count(), cells = n - 1;
    const Eigen::Index coarse = std::ldexp(1.0, L - 1) > static_cast<double>(cells) ? 0 : (Eigen::Index{1} << (L - 1));
    if (coarse == 0 || cells % coarse != 0)
        config_error("grid with " + std::to_string(cells) + " cells cannot be coarsened " + std::to_string(L - 1) +
                     " times by 2");
    if (static_cast<double>(cells / coarse) < cfg.min_cells)
        config_error("coarsest level has fewer than " + std::to_string(cfg.min_cells) + " cells per axis");
    bool any = false;
    for (const auto& q : integrands) {
        if (q.size() != log_arg.size()) config_error("integrand does not match the grid of the log argument");
        any = any || (q != 0.0).any();
    }
    std::vector<SingularEstimate> out(integrands.size());
    for (auto& e : out) e.levels.assign(static_cast<std::size_t>(L), 0.0);
    if (!any) return out;
    check_transversal(log_arg);
    const Eigen::ArrayXd& f = log_arg.values;
    const std::size_t Q = integrands.size();

    // 2D: the integrand is split by the direction of grad f, and each part is integrated
    // along the grid lines that cross the nodal set of f.
    std::array<std::vector<Eigen::ArrayXd>, 2> parts;
    if (g.kind == GridKind::Tensor2D) {
        Eigen::ArrayXd d0(f.size()), d1(f.size());
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                d0[i * n + j] = line_derivative(f.data() + j, n, n, i, g.spacing);
                d1[i * n + j] = line_derivative(f.data() + i * n, 1, n, j, g.spacing);
            }
        const Eigen::ArrayXd s0 = d0.square(), s1 = d1.square();
        const double eps = 1e-24 * (s0 + s1).maxCoeff() + 1e-300;
        const Eigen::ArrayXd w0 = (s0 + eps) / (s0 + s1 + 2 * eps);
        for (const auto& q : integrands) {
            parts[0].push_back(q * w0);
            parts[1].push_back(q * (1.0 - w0));
        }
    }

    // Scale of each integral for the divergence test: trapezoid sum of |g ln|f||.
    std::vector<double> mass(Q, 0.0);
    {
        const Eigen::ArrayXd w = trapezoid_weights(g);
        const Eigen::ArrayXd lf = (f.abs() > 0).select(f.abs().max(1e-300).log().abs(), 0.0).max(1.0);
        for (std::size_t q = 0; q < Q; ++q) mass[q] = (w * integrands[q].abs() * lf).sum();
    }
    bool band_used = false;
    for (int l = 0; l < L; ++l) {
        const Eigen::Index s = Eigen::Index{1} << l, m = cells / s;
        const double H = g.spacing * static_cast<double>(s);
        std::vector<double> acc(Q, 0.0);
        if (g.kind == GridKind::Uniform1D) {
            std::vector<const double*> gp;
            for (const auto& q : integrands) gp.push_back(q.data());
            line_rule(f.data(), s, gp, s, m, cfg.exclusion_radius / H, H, acc, band_used);
        } else {
            for (int axis = 0; axis < 2; ++axis) {
                const Eigen::Index along = axis == 0 ? n : 1, across = axis == 0 ? 1 : n;
                for (Eigen::Index I = 0; I <= m; ++I) {
                    const Eigen::Index start = I * s * across;
                    std::vector<const double*> gp;
                    for (const auto& q : parts[static_cast<std::size_t>(axis)]) gp.push_back(q.data() + start);
                    std::vector<double> line(Q, 0.0);
                    line_rule(f.data() + start, s * along, gp, s * along, m, cfg.exclusion_radius / H, H, line, band_used);
                    const double wo = (I == 0 || I == m ? 0.5 : 1.0) * H;
                    for (std::size_t q = 0; q < Q; ++q) acc[q] += wo * line[q];
                }
            }
        }
        for (std::size_t q = 0; q < Q; ++q) out[q].levels[static_cast<std::size_t>(l)] = acc[q];
    }
    if (!band_used) {
        for (auto& e : out) e.value = e.levels.front();
        return out;
    }

    // Extrapolation in the spacing with the basis 1, h^2, h^3, ...; X_k fits the finest k + 1 levels.
    for (std::size_t q = 0; q < Q; ++q) {
        const auto& v = out[q].levels;
        std::vector<double> X;
        for (int k = 0; k < L; ++k) {
            Eigen::MatrixXd V(k + 1, k + 1);
            Eigen::VectorXd rhs(k + 1);
            for (int r = 0; r <= k; ++r) {
                const double h = std::ldexp(1.0, r);
                for (int c = 0; c <= k; ++c) V(r, c) = c == 0 ? 1.0 : std::pow(h, c + 1);
                rhs[r] = v[static_cast<std::size_t>(r)];
            }
            X.push_back(V.colPivHouseholderQr().solve(rhs)[0]);
        }
        out[q].value = X.back();
        out[q].error = std::abs(X[X.size() - 1] - X[X.size() - 2]);
        if (X.size() >= 3) out[q].error = std::max(out[q].error, std::abs(X[X.size() - 2] - X[X.size() - 3]));
        // Divergence: the level-to-level change does not shrink anywhere.
        bool shrinks = v.size() < 3;
        for (std::size_t l = 2; l < v.size(); ++l)
            shrinks = shrinks || std::abs(v[l - 2] - v[l - 1]) < 0.9 * std::abs(v[l - 1] - v[l]);
        const double d_fine = std::abs(v[0] - v[1]);
        if (!shrinks && d_fine > 1e-2 * mass[q])
            numerical_error("singular quadrature extrapolation does not converge (level change " + std::to_string(d_fine) +
                            " does not decrease under refinement)");
    }
    return out;
}

SingularEstimate singular_quadrature(const std::vector<Field>& weight_grad, const Field& log_arg,
                                     const std::vector<Field>& flux, const SingularQuadConfig& cfg) {
    if (weight_grad.size() != flux.size() || weight_grad.empty())
        config_error("weight gradient and flux need the same number of components");
    Eigen::ArrayXd g = Eigen::ArrayXd::Zero(log_arg.size());
    for (std::size_t d = 0; d < flux.size(); ++d) {
        require_same_grid(weight_grad[d], log_arg);
        require_same_grid(flux[d], log_arg);
        g += weight_grad[d].values * flux[d].values;
    }
    return log_moments({g}, log_arg, cfg).front();
}

double singular_inner_product(const std::vector<Field>& weight_grad, const Field& log_arg,
                              const std::vector<Field>& flux, const SingularQuadConfig& cfg) {
    return singular_quadrature(weight_grad, log_arg, flux, cfg).value;
}

GridSpec default_branch_grid() { return GridSpec::tensor(36.0, 1200); }

LevelData assemble_level(const KernelModel& model, const EigenPairSet& pairs, int level, const SingularQuadConfig& cfg) {
    if (level < 0 || level > pairs.max_order) config_error("level outside the eigenpair set");
    if (model.dim != pairs.dim) config_error("kernel and eigenpairs differ in dimension");
    if (level >= 1 && pairs.dim != 2) config_error("branching systems for k >= 1 are defined for N = 2");
    const int N = pairs.dim;
    const GridSpec& g = pairs.grid;
    auto data = std::make_shared<LevelFields>();
    data->grid = g;
    data->cfg = cfg;

    LevelData out;
    out.level = level;
    out.alpha = (N + level) / (2.0 * model.order);
    out.basis = multi_indices(N, level);
    const auto M = static_cast<Eigen::Index>(out.basis.size());

    Eigen::ArrayXd y1(g.size()), y2(g.size());
    for (Eigen::Index p = 0; p < g.size(); ++p) {
        const auto y = g.point(p);
        y1[p] = y[0];
        y2[p] = y[1];
    }
    const Eigen::ArrayXd w = trapezoid_weights(g);
    std::vector<Eigen::ArrayXd> adj, ygrad;
    for (const auto& b : out.basis) {
        const std::size_t idx = static_cast<std::size_t>(pairs.index_of(b));
        const Field& psi = pairs.eigenfunctions[idx];
        if (!psi.has_terms()) config_error("eigenfunctions need kernel-derivative metadata");
        const ExactPolynomial& a = pairs.adjoints[idx];
        adj.push_back(sample(g, a).values);
        Eigen::ArrayXd yg = y1 * differentiate(model, psi, 0).values;
        if (N == 2) yg += y2 * differentiate(model, psi, 1).values;
        ygrad.push_back(std::move(yg));
        data->psi.push_back(psi.values);

        KernelTerms lap = shift_terms(psi.terms, 0, 2);
        if (N == 2) {
            const KernelTerms second = shift_terms(psi.terms, 1, 2);
            lap.insert(lap.end(), second.begin(), second.end());
        }
        std::vector<Eigen::ArrayXd> fl, wt;
        for (int d = 0; d < N; ++d) {
            fl.push_back(eval_terms(model, shift_terms(lap, d), g).values);
            wt.push_back(sample(g, partial(a, d)).values);
        }
        data->flux.push_back(std::move(fl));
        data->weight.push_back(std::move(wt));
    }
    out.projections.resize(M, M);
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index j = 0; j < M; ++j)
            out.projections(i, j) = (w * adj[static_cast<std::size_t>(i)] * ygrad[static_cast<std::size_t>(j)]).sum();
    out.self_projection = (w * data->psi[0] * ygrad[0]).sum();

    out.log_terms = [data, N](const std::vector<double>& c) {
        if (c.size() != data->psi.size()) config_error("coefficient count does not match the level basis");
        if (c == data->last_c) return data->last;
        Eigen::ArrayXd psi = Eigen::ArrayXd::Zero(data->grid.size());
        std::vector<Eigen::ArrayXd> flux(static_cast<std::size_t>(N), Eigen::ArrayXd::Zero(data->grid.size()));
        for (std::size_t j = 0; j < c.size(); ++j) {
            psi += c[j] * data->psi[j];
            for (int d = 0; d < N; ++d) flux[static_cast<std::size_t>(d)] += c[j] * data->flux[j][static_cast<std::size_t>(d)];
        }
        std::vector<Eigen::ArrayXd> integrands;
        for (const auto& wt : data->weight) {
            Eigen::ArrayXd q = Eigen::ArrayXd::Zero(data->grid.size());
            for (int d = 0; d < N; ++d) q += wt[static_cast<std::size_t>(d)] * flux[static_cast<std::size_t>(d)];
            integrands.push_back(std::move(q));
        }
        data->last = log_moments(integrands, Field(data->grid, std::move(psi)), data->cfg);
        data->last_c = c;
        return data->last;
    };
    return out;
}

double assemble_k0(const KernelModel& model, const EigenPairSet& pairs, const SingularQuadConfig& cfg) {
    const LevelData lvl = assemble_level(model, pairs, 0, cfg);
    const SingularEstimate om = lvl.log_terms({1.0}).front();
    return -om.value + lvl.alpha / 4.0 * lvl.projections(0, 0);
}

DipoleSystem dipole_from_level(const LevelData& level) {
    if (level.level != 1 || level.basis.size() != 2) config_error("the dipole system needs the N = 2, k = 1 level");
    const Eigen::MatrixXd& I = level.projections;
    const double q = level.alpha / 4.0;
    DipoleSystem s;
    s.alpha1 = level.alpha;
    s.projections = I;
    s.A = q * ((I(0, 1) + I(1, 1)) - (I(0, 0) + I(1, 0)));
    s.A_printed = -s.A;
    s.B = q * (I(0, 0) + 2 * I(1, 0) - I(1, 1));
    s.C = -q * I(1, 0);
    s.nondegeneracy = I(0, 0) - I(0, 1);
    s.degenerate = std::abs(s.nondegeneracy) < 1e-10;
    const LogTerms terms = level.log_terms;
    s.omega = [terms](double c2) {
        const auto om = terms({1.0 - c2, c2});
        SingularEstimate e;
        e.value = om[1].value - c2 * (om[0].value + om[1].value);
        e.error = om[1].error + std::abs(c2) * (om[0].error + om[1].error);
        return e;
    };
    s.mu = [terms, I, q](double c2) {
        const auto om = terms({1.0 - c2, c2});
        return -(om[0].value + om[1].value) + q * ((1.0 - c2) * (I(0, 0) + I(1, 0)) + c2 * (I(0, 1) + I(1, 1)));
    };
    return s;
}

DipoleSystem assemble_dipole(const KernelModel& model, const EigenPairSet& pairs, const SingularQuadConfig& cfg) {
    return dipole_from_level(assemble_level(model, pairs, 1, cfg));
}

DipoleSystem dipole_from_coefficients(double A, double B, double C) {
    DipoleSystem s;
    s.A = A;
    s.A_printed = -A;
    s.B = B;
    s.C = C;
    s.nondegeneracy = 1.0;
    s.omega = [](double) { return SingularEstimate{}; };
    s.mu = [](double) { return 0.0; };
    return s;
}

DipoleReport solve_dipole(const DipoleSystem& sys, const SolveOptions& opt) {
    if (sys.degenerate || std::abs(sys.nondegeneracy) < 1e-10)
        invariant_error("dipole nondegeneracy condition fails: " + std::to_string(sys.nondegeneracy));
    DipoleReport r;
    auto snap = [&](double v) { return std::abs(v) <= opt.coefficient_floor ? 0.0 : v; };
    const double A = snap(sys.A), B = snap(sys.B), C = snap(sys.C);
    r.cond_a = C * (A + B + C) > 0;
    r.cond_b = A != 0.0 && C * (-B * B / (4 * A) + C) < 0;
    r.cond_c = A != 0.0 && -B / (2 * A) > 0 && -B / (2 * A) < 1;
    r.predicts_two = r.cond_a && r.cond_b && r.cond_c;

    auto quad = [&](double c) { return (sys.A * c + sys.B) * c + sys.C; };
    const int n = std::max(opt.lattice, 2);
    bool all_small = true;
    double quad_sup = 0.0;
    for (int k = 0; k < n; ++k) {
        const double c = static_cast<double>(k) / (n - 1);
        const SingularEstimate om = sys.omega(c);
        const double res = quad(c) + om.value;
        r.lattice.push_back(c);
        r.lattice_residual.push_back(res);
        r.omega_sup = std::max(r.omega_sup, std::abs(om.value));
        r.omega_error = std::max(r.omega_error, om.error);
        quad_sup = std::max(quad_sup, std::abs(quad(c)));
        if (std::abs(res) > std::max(opt.tolerance, om.error)) all_small = false;
    }
    double vertex_value = quad_sup;
    if (A != 0.0) {
        const double v = -B / (2 * A);
        if (v >= 0 && v <= 1) vertex_value = std::abs(quad(v));
    }
    r.perturbation_controlled = r.omega_sup <= vertex_value;

    const std::vector<MultiIndex> basis{MultiIndex{1, 0}, MultiIndex{0, 1}};
    if (all_small) {
        r.continuum = true;
        r.root_count = -1;
        r.warnings.push_back("F + omega vanishes on the whole lattice within its error estimate: continuum of solutions");
        for (std::size_t k = 0; k < r.lattice.size(); ++k) {
            BranchSolution s = make_solution(1, basis, {1.0 - r.lattice[k], r.lattice[k]});
            s.mu_first = sys.mu(r.lattice[k]);
            s.residual = std::abs(r.lattice_residual[k]);
            s.note = "continuum";
            r.solutions.push_back(std::move(s));
        }
        return r;
    }

    std::vector<double> seeds;
    if (A != 0.0) {
        bool real = false;
        const auto q = quadratic_roots(sys.A, sys.B, sys.C, real);
        if (real) seeds.insert(seeds.end(), {q.first, q.second});
    } else if (B != 0.0) {
        r.warnings.push_back("quadratic coefficient vanishes: linear case");
        seeds.push_back(-sys.C / sys.B);
    }
    for (std::size_t k = 0; k < r.lattice.size(); ++k) {
        if (r.lattice_residual[k] == 0.0) seeds.push_back(r.lattice[k]);
        if (k + 1 < r.lattice.size() && r.lattice_residual[k] * r.lattice_residual[k + 1] < 0)
            seeds.push_back(0.5 * (r.lattice[k] + r.lattice[k + 1]));
    }
    auto f = [&](double c) { return quad(c) + sys.omega(c).value; };
    std::vector<std::pair<double, int>> roots;
    int failed = 0;
    for (double c : seeds) {
        if (c < -0.1 || c > 1.1) continue;
        double val = f(c);
        int it = 0;
        while (std::abs(val) > opt.tolerance && it < opt.max_newton) {
            const double h = 1e-6;
            const double d = (f(c + h) - f(c - h)) / (2 * h);
            if (d == 0.0 || !std::isfinite(d)) break;
            c -= val / d;
            val = f(c);
            ++it;
        }
        if (std::abs(val) > opt.tolerance) {
            ++failed;
            continue;
        }
        for (int polish = 0; polish < 3 && val != 0.0; ++polish) {
            const double d = (f(c + 1e-6) - f(c - 1e-6)) / 2e-6;
            if (d == 0.0 || !std::isfinite(d) || std::abs(val / d) > 1e-6) break;
            const double next = c - val / d, fv = f(next);
            if (std::abs(fv) > std::abs(val)) break;
            c = next;
            val = fv;
        }
        if (c < -1e-12 || c > 1 + 1e-12) continue;
        c = std::clamp(c, 0.0, 1.0);
        if (std::none_of(roots.begin(), roots.end(), [&](const auto& x) { return std::abs(x.first - c) < 1e-6; }))
            roots.push_back({c, it});
    }
    if (failed > 0 && roots.empty() && failed == static_cast<int>(seeds.size()))
        numerical_error("Newton iteration failed to converge within " + std::to_string(opt.max_newton) + " steps");
    if (failed > 0) r.warnings.push_back(std::to_string(failed) + " Newton seed(s) did not converge");
    std::sort(roots.begin(), roots.end());
    for (const auto& [c, it] : roots) {
        BranchSolution s = make_solution(1, basis, {1.0 - c, c});
        s.mu_first = sys.mu(c);
        s.residual = std::abs(f(c));
        s.newton_iters = it;
        r.solutions.push_back(std::move(s));
    }
    r.root_count = static_cast<int>(r.solutions.size());
    return r;
}

std::string to_string(ConicKind kind) {
    switch (kind) {
        case ConicKind::Ellipse: return "ellipse";
        case ConicKind::Circle: return "circle";
        case ConicKind::Parabola: return "parabola";
        case ConicKind::Hyperbola: return "hyperbola";
        case ConicKind::Degenerate: return "degenerate";
    }
    return "unknown";
}

ConicClass classify_conic(const ConicCoeffs& q) {
    ConicClass c;
    const double scale = conic_scale(q);
    const double qs = std::max({std::abs(q.A), std::abs(q.B), std::abs(q.E)});
    c.discriminant = q.E * q.E - 4 * q.A * q.B;
    Eigen::Matrix3d M;
    M << q.A, q.E / 2, q.C / 2, q.E / 2, q.B, q.D / 2, q.C / 2, q.D / 2, q.F;
    c.determinant = M.determinant();
    c.degenerate = scale == 0.0 || std::abs(c.determinant) <= 1e-12 * scale * scale * scale;
    if (qs <= 1e-14 * scale || qs == 0.0) {
        c.kind = ConicKind::Degenerate;
        c.degenerate = true;
        return c;
    }
    if (std::abs(c.discriminant) <= 1e-12 * qs * qs) c.kind = ConicKind::Parabola;
    else if (c.discriminant > 0) c.kind = ConicKind::Hyperbola;
    else {
        const bool round = std::abs(q.A - q.B) <= 1e-12 * qs && std::abs(q.E) <= 1e-12 * qs;
        c.kind = round ? ConicKind::Circle : ConicKind::Ellipse;
        c.empty = !c.degenerate && q.A * c.determinant > 0;
    }
    return c;
}

ConicIntersection intersect_conics(const ConicCoeffs& p, const ConicCoeffs& q) {
    ConicIntersection out;
    const double sp = conic_scale(p), sq = conic_scale(q);
    if (sp == 0.0 || sq == 0.0) {
        out.infinite = true;
        return out;
    }
    const auto P = in_y(p), Q = in_y(q);
    const int dp = degree_in_y(P, 1e-14 * sp), dq = degree_in_y(Q, 1e-14 * sq);
    Poly res;
    if (dp == 2 && dq == 2) {
        const Poly a = padd(pmul(P[2], Q[0]), pmul(P[0], Q[2]), -1.0);
        const Poly b = padd(pmul(P[2], Q[1]), pmul(P[1], Q[2]), -1.0);
        const Poly c = padd(pmul(P[1], Q[0]), pmul(P[0], Q[1]), -1.0);
        res = padd(pmul(a, a), pmul(b, c), -1.0);
    } else if (dp >= 1 && dq >= 1) {
        const auto& hi = dp >= dq ? P : Q;
        const auto& lo = dp >= dq ? Q : P;
        if (std::max(dp, dq) == 2)
            res = padd(padd(pmul(hi[2], pmul(lo[0], lo[0])), pmul(hi[1], pmul(lo[0], lo[1])), -1.0),
                       pmul(hi[0], pmul(lo[1], lo[1])));
        else
            res = padd(pmul(P[1], Q[0]), pmul(P[0], Q[1]), -1.0);
    } else {
        res = dp == 0 ? P[0] : Q[0];
    }
    const double rs = pmax(res);
    double ref = 1.0;
    for (const auto& part : {P, Q})
        for (const auto& c : part) ref = std::max(ref, pmax(c));
    if (rs <= 1e-13 * ref * ref * ref * ref) {
        out.infinite = true;
        return out;
    }
    for (double x : real_roots(res)) {
        std::vector<double> ys = y_candidates(P, x);
        const std::vector<double> more = y_candidates(Q, x);
        ys.insert(ys.end(), more.begin(), more.end());
        for (double y : ys) {
            double xx = x, yy = y;
            if (polish(p, q, xx, yy)) push_unique(out.points, xx, yy, 1e-9 * (1.0 + std::abs(xx) + std::abs(yy)));
        }
    }
    std::sort(out.points.begin(), out.points.end());
    return out;
}

TripleSystem triple_from_level(const LevelData& level) {
    if (level.level != 2 || level.basis.size() != 3) config_error("the triple system needs the N = 2, k = 2 level");
    const Eigen::MatrixXd& I = level.projections;
    auto i = [&](int a, int b) { return I(a - 1, b - 1); };
    const double q = level.alpha / 4.0;
    TripleSystem s;
    s.alpha2 = level.alpha;
    s.projections = I;
    ConicCoeffs& f1 = s.coeffs[0];
    ConicCoeffs& f2 = s.coeffs[1];
    const double base = 2 * (i(2, 1) - i(3, 1));
    f1.A = -q * ((i(1, 1) + i(2, 1) - i(3, 1)) - (i(1, 2) + i(2, 2) - i(3, 2)));
    f1.B = q * ((i(1, 1) - i(2, 1) + i(3, 1)) - (i(1, 3) - i(2, 3) + i(3, 3)));
    f1.C = q * (base - (i(2, 2) - i(3, 2)) + i(1, 1));
    f1.D = q * (base - (i(2, 3) - i(3, 3)) - i(1, 1));
    f1.E = q * ((i(1, 3) - i(1, 2)) - (base - (i(2, 2) - i(3, 2)) - (i(2, 3) - i(3, 3))));
    s.C1_printed = q * (base - (i(2, 2) - i(3, 2)) - i(1, 1));
    s.C1_unstarred = q * (base - (i(2, 2) - i(3, 2)) - level.self_projection);
    s.D1_unstarred = q * (base - (i(2, 3) - i(3, 3)) - level.self_projection);
    f2.A = -q * (i(3, 1) - i(3, 2));
    f2.B = q * (i(2, 1) - i(2, 3));
    f2.C = q * i(3, 1);
    f2.D = -q * i(2, 1);
    f2.E = q * ((i(2, 1) - i(2, 2)) - (i(3, 1) - i(3, 3)));
    s.nondegeneracy = (i(1, 3) - i(1, 1)) * (i(2, 3) - i(2, 2)) - (i(1, 3) - i(1, 2)) * (i(2, 3) - i(2, 1));
    s.degenerate = std::abs(s.nondegeneracy) < 1e-10;

    const LogTerms terms = level.log_terms;
    const double constant = -q * (i(2, 1) - i(3, 1));
    s.omega = [terms, constant](double c2, double c3) {
        const auto om = terms({1.0 - c2 - c3, c2, c3});
        std::array<SingularEstimate, 2> e;
        e[0].value = c3 * (om[0].value - om[1].value + om[2].value) - c2 * (om[0].value + om[1].value - om[2].value) +
                     (om[1].value - om[2].value) + constant;
        e[0].error = (std::abs(c3) + std::abs(c2) + 1) * (om[0].error + om[1].error + om[2].error);
        e[1].value = c3 * om[1].value - c2 * om[2].value;
        e[1].error = std::abs(c3) * om[1].error + std::abs(c2) * om[2].error;
        return e;
    };
    s.mu = [terms, I, q](double c2, double c3, bool& fallback) {
        const std::vector<double> c{1.0 - c2 - c3, c2, c3};
        const auto om = terms(c);
        fallback = std::abs(c3 - c2) < 1e-6;
        if (!fallback) {
            double proj = 0.0;
            for (int j = 0; j < 3; ++j) proj += c[static_cast<std::size_t>(j)] * (I(1, j) - I(2, j));
            return (om[1].value - om[2].value - q * proj) / (c3 - c2);
        }
        double num = 0.0, den = 0.0;
        for (int a = 0; a < 3; ++a) {
            double r = -om[static_cast<std::size_t>(a)].value;
            for (int j = 0; j < 3; ++j) r += q * I(a, j) * c[static_cast<std::size_t>(j)];
            num += c[static_cast<std::size_t>(a)] * r;
            den += c[static_cast<std::size_t>(a)] * c[static_cast<std::size_t>(a)];
        }
        return num / den;
    };
    return s;
}

TripleSystem assemble_triple(const KernelModel& model, const EigenPairSet& pairs, const SingularQuadConfig& cfg) {
    return triple_from_level(assemble_level(model, pairs, 2, cfg));
}

TripleSystem triple_from_conics(const ConicCoeffs& first, const ConicCoeffs& second) {
    TripleSystem s;
    s.coeffs = {first, second};
    s.C1_printed = s.C1_unstarred = first.C;
    s.D1_unstarred = first.D;
    s.nondegeneracy = 1.0;
    s.omega = [](double, double) { return std::array<SingularEstimate, 2>{}; };
    s.mu = [](double, double, bool& fallback) {
        fallback = false;
        return 0.0;
    };
    return s;
}

TripleReport solve_triple(const TripleSystem& sys, const SolveOptions& opt) {
    if (sys.degenerate || std::abs(sys.nondegeneracy) < 1e-10)
        invariant_error("triple nondegeneracy condition fails: " + std::to_string(sys.nondegeneracy));
    TripleReport r;
    auto snap = [&](ConicCoeffs c) {
        for (double* v : {&c.A, &c.B, &c.C, &c.D, &c.E, &c.F})
            if (std::abs(*v) <= opt.coefficient_floor) *v = 0.0;
        return c;
    };
    const ConicCoeffs q1 = snap(sys.coeffs[0]), q2 = snap(sys.coeffs[1]);
    r.conics = {classify_conic(q1), classify_conic(q2)};
    const ConicIntersection cut = intersect_conics(q1, q2);
    r.conic_infinite = cut.infinite;
    std::vector<std::array<double, 2>> seeds;
    for (const auto& p : cut.points) {
        if (p[0] >= -0.1 && p[0] <= 1.1 && p[1] >= -0.1 && p[1] <= 1.1) seeds.push_back(p);
        if (p[0] >= 0 && p[0] <= 1 && p[1] >= 0 && p[1] <= 1) r.conic_roots.push_back(p);
    }

    auto residual = [&](double c2, double c3) {
        const auto om = sys.omega(c2, c3);
        return std::array<double, 2>{sys.coeffs[0](c2, c3) + om[0].value, sys.coeffs[1](c2, c3) + om[1].value};
    };
    auto norm = [](const std::array<double, 2>& v) { return std::max(std::abs(v[0]), std::abs(v[1])); };

    const int n = std::max(opt.triple_lattice, 2);
    std::vector<double> lattice(static_cast<std::size_t>(n * n));
    std::array<double, 2> quad_sup{0.0, 0.0};
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double c2 = static_cast<double>(a) / (n - 1), c3 = static_cast<double>(b) / (n - 1);
            const auto om = sys.omega(c2, c3);
            for (int k = 0; k < 2; ++k) {
                r.omega_sup[static_cast<std::size_t>(k)] =
                    std::max(r.omega_sup[static_cast<std::size_t>(k)], std::abs(om[static_cast<std::size_t>(k)].value));
                quad_sup[static_cast<std::size_t>(k)] =
                    std::max(quad_sup[static_cast<std::size_t>(k)], std::abs(sys.coeffs[static_cast<std::size_t>(k)](c2, c3)));
            }
            lattice[static_cast<std::size_t>(a * n + b)] =
                std::max(std::abs(sys.coeffs[0](c2, c3) + om[0].value), std::abs(sys.coeffs[1](c2, c3) + om[1].value));
        }
    bool controlled = true;
    for (int k = 0; k < 2; ++k) {
        const ConicCoeffs& c = sys.coeffs[static_cast<std::size_t>(k)];
        double ref = quad_sup[static_cast<std::size_t>(k)];
        const double det = 4 * c.A * c.B - c.E * c.E;
        if (det != 0.0) {
            const double x = (-2 * c.B * c.C + c.E * c.D) / det, y = (-2 * c.A * c.D + c.E * c.C) / det;
            if (x >= 0 && x <= 1 && y >= 0 && y <= 1) ref = std::abs(c(x, y));
        }
        controlled = controlled && r.omega_sup[static_cast<std::size_t>(k)] <= ref;
    }
    r.perturbation_controlled = controlled;

    const bool omega_zero = r.omega_sup[0] == 0.0 && r.omega_sup[1] == 0.0;
    const std::size_t conic_seeds = seeds.size();
    if (!omega_zero || cut.infinite) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const double v = lattice[static_cast<std::size_t>(a * n + b)];
                bool minimum = true;
                for (int da = -1; da <= 1; ++da)
                    for (int db = -1; db <= 1; ++db) {
                        const int x = a + da, y = b + db;
                        if ((da || db) && x >= 0 && x < n && y >= 0 && y < n && lattice[static_cast<std::size_t>(x * n + y)] < v)
                            minimum = false;
                    }
                if (minimum) seeds.push_back({static_cast<double>(a) / (n - 1), static_cast<double>(b) / (n - 1)});
            }
    }

    std::vector<std::pair<std::array<double, 2>, int>> roots;
    int failed = 0;
    for (auto c : seeds) {
        auto val = residual(c[0], c[1]);
        int it = 0;
        while (norm(val) > opt.tolerance && it < opt.max_newton) {
            const double h = 1e-6;
            const auto f2 = residual(c[0] + h, c[1]), f3 = residual(c[0], c[1] + h);
            Eigen::Matrix2d J;
            J << (f2[0] - val[0]) / h, (f3[0] - val[0]) / h, (f2[1] - val[1]) / h, (f3[1] - val[1]) / h;
            const Eigen::Vector2d step = J.completeOrthogonalDecomposition().solve(Eigen::Vector2d(val[0], val[1]));
            if (!step.allFinite()) break;
            double t = 1.0;
            std::array<double, 2> next{};
            std::array<double, 2> trial{};
            bool decreased = false;
            for (int back = 0; back < 8 && !decreased; ++back) {
                trial = {c[0] - t * step[0], c[1] - t * step[1]};
                next = residual(trial[0], trial[1]);
                decreased = norm(next) < norm(val);
                t *= 0.5;
            }
            if (!decreased) break;
            c = trial;
            val = next;
            ++it;
            if (std::abs(c[0]) > 10 || std::abs(c[1]) > 10) break;
        }
        if (norm(val) > opt.tolerance) {
            ++failed;
            continue;
        }
        if (c[0] < -1e-12 || c[0] > 1 + 1e-12 || c[1] < -1e-12 || c[1] > 1 + 1e-12) continue;
        c = {std::clamp(c[0], 0.0, 1.0), std::clamp(c[1], 0.0, 1.0)};
        if (std::none_of(roots.begin(), roots.end(), [&](const auto& x) {
                return std::abs(x.first[0] - c[0]) + std::abs(x.first[1] - c[1]) < 1e-7;
            }))
            roots.push_back({c, it});
    }
    if (conic_seeds > 0 && roots.empty() && failed == static_cast<int>(seeds.size()))
        numerical_error("Newton iteration failed to converge within " + std::to_string(opt.max_newton) + " steps");
    if (failed > 0) r.warnings.push_back(std::to_string(failed) + " Newton seed(s) did not converge");
    std::sort(roots.begin(), roots.end());
    // A root is isolated unless the Jacobian is singular and a nearby point along
    // its null direction can be corrected back onto the solution set.
    auto on_curve = [&](const std::array<double, 2>& c) {
        const double h = 1e-3;
        const auto fp2 = residual(c[0] + h, c[1]), fm2 = residual(c[0] - h, c[1]);
        const auto fp3 = residual(c[0], c[1] + h), fm3 = residual(c[0], c[1] - h);
        Eigen::Matrix2d J;
        J << fp2[0] - fm2[0], fp3[0] - fm3[0], fp2[1] - fm2[1], fp3[1] - fm3[1];
        J /= 2 * h;
        const Eigen::JacobiSVD<Eigen::Matrix2d> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Eigen::Vector2d sv = svd.singularValues();
        if (sv[0] > 0 && sv[1] > 1e-2 * sv[0]) return false;
        const Eigen::Vector2d v = svd.matrixV().col(1), w = svd.matrixV().col(0), u = svd.matrixU().col(0);
        for (double sgn : {1.0, -1.0}) {
            // Correct across the curve only.
            Eigen::Vector2d x(c[0] + sgn * 0.02 * v[0], c[1] + sgn * 0.02 * v[1]);
            std::array<SingularEstimate, 2> om{};
            double left = INFINITY, noise = 0.0;
            for (int it = 0; it < 4; ++it) {
                om = sys.omega(x[0], x[1]);
                const Eigen::Vector2d val(sys.coeffs[0](x[0], x[1]) + om[0].value, sys.coeffs[1](x[0], x[1]) + om[1].value);
                left = val.lpNorm<Eigen::Infinity>();
                noise = std::max(om[0].error, om[1].error);
                if (left <= std::max(opt.tolerance, 10 * noise)) break;
                x -= w * (u.dot(val) / sv[0]);
            }
            if (left <= std::max(opt.tolerance, 10 * noise) && std::hypot(x[0] - c[0], x[1] - c[1]) > 0.005) return true;
        }
        return false;
    };
    const std::vector<MultiIndex> basis{MultiIndex{2, 0}, MultiIndex{1, 1}, MultiIndex{0, 2}};
    for (const auto& [c, it] : roots) {
        BranchSolution s = make_solution(2, basis, {1.0 - c[0] - c[1], c[0], c[1]});
        bool fallback = false;
        s.mu_first = sys.mu(c[0], c[1], fallback);
        if (fallback) s.note = "mu recovered by least squares (c2 = c3)";
        if (on_curve(c)) {
            r.continuum = true;
            s.note += std::string(s.note.empty() ? "" : "; ") + "not isolated: lies on a curve of solutions";
        }
        s.residual = norm(residual(c[0], c[1]));
        s.newton_iters = it;
        r.solutions.push_back(std::move(s));
    }
    r.root_count = r.continuum ? -1 : static_cast<int>(r.solutions.size());
    if (r.continuum) r.warnings.push_back("solutions are not isolated: continuum of roots");
    else if (r.root_count > 4) r.warnings.push_back("more than four roots found");
    return r;
}

}  // namespace simfilm
