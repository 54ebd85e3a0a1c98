#include "simfilm/profile.hpp"

#include <cmath>
#include <numbers>

namespace simfilm {

AlphaPair alpha_mass(int N, double n) {
    if (N < 1) config_error("dimension must be positive");
    const double den = 4.0 + N * n;
    if (den <= 0.0) config_error("alpha_mass needs 4 + N n > 0");
    return {N / den, 1.0 / den};
}

double alpha_expansion(int k, int N, double n, double mu1k) { return (k + N) / 4.0 + mu1k * n; }

GridSpec profile_grid(const ProfileConfig& cfg) {
    if (cfg.cells < 8 || cfg.cells % 2 != 0) config_error("profile grid needs an even cell count >= 8");
    return GridSpec::uniform(cfg.half_width, cfg.cells);
}

namespace {

// Column of the circulant with symbol (i w)^p / (1 + w^4)^r, indexed by node offset.
Eigen::ArrayXd symbol_column(Eigen::Index M, double h, int p, int r = 0) {
    const Eigen::Index K = (M - 1) / 2;
    const double P = static_cast<double>(M) * h;
    Eigen::ArrayXd col = Eigen::ArrayXd::Constant(M, p == 0 ? 1.0 / static_cast<double>(M) : 0.0);
    for (Eigen::Index d = 0; d < M; ++d) {
        double s = 0.0;
        for (Eigen::Index q = 1; q <= K; ++q) {
            const double w = 2.0 * std::numbers::pi * static_cast<double>(q) / P;
            const double x = w * static_cast<double>(d) * h;
            const double a = std::pow(w, p) / std::pow(1.0 + w * w * w * w, r);
            switch (p % 4) {
                case 0: s += a * std::cos(x); break;
                case 1: s -= a * std::sin(x); break;
                case 2: s -= a * std::cos(x); break;
                default: s += a * std::sin(x); break;
            }
        }
        col[d] += 2.0 * s / static_cast<double>(M);
    }
    return col;
}

Eigen::MatrixXd circulant(const Eigen::ArrayXd& col) {
    const Eigen::Index M = col.size();
    Eigen::MatrixXd D(M, M);
    for (Eigen::Index j = 0; j < M; ++j)
        for (Eigen::Index k = 0; k < M; ++k) D(j, k) = col[((j - k) % M + M) % M];
    return D;
}

double l2(const Eigen::VectorXd& v, double h) { return std::sqrt(h * v.squaredNorm()); }

void require_line(const KernelModel& model) {
    if (model.dim != 1) config_error("profiles are computed for N = 1");
}

// Bordered factorization: rows L g + lambda 1 = rhs, last row pins one linear functional.
struct Bordered {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    Eigen::Index M = 0;

    Bordered(const Eigen::MatrixXd& L, const Eigen::RowVectorXd& pin) : M(L.rows()) {
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(M + 1, M + 1);
        K.topLeftCorner(M, M) = L;
        K.topRightCorner(M, 1).setOnes();
        K.bottomLeftCorner(1, M) = pin;
        lu.compute(K);
        if (!(lu.rcond() > 1e-14)) numerical_error("similarity operator is singular on the normalized set");
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs, double pinned) const {
        Eigen::VectorXd b(M + 1);
        b.head(M) = rhs;
        b[M] = pinned;
        return lu.solve(b).head(M);
    }
};

double max_residual(const SpectralOps& ops, const Eigen::MatrixXd& L, const Eigen::VectorXd& f, double n, double eta) {
    const Eigen::VectorXd r = L * f + thin_film_term(ops, f, n, eta);
    const Eigen::Index M = f.size();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < M; ++i) {
        bool near_zero = false;
        for (Eigen::Index j = std::max<Eigen::Index>(i - 2, 0); j < std::min(i + 2, M - 1); ++j)
            near_zero = near_zero || f[j] * f[j + 1] <= 0.0;
        if (!near_zero) worst = std::max(worst, std::abs(r[i]));
    }
    return worst;
}

}  // namespace

SpectralOps spectral_ops(const GridSpec& grid) {
    if (grid.kind != GridKind::Uniform1D) config_error("spectral operators need a uniform 1D grid");
    const Eigen::Index M = grid.size();
    if (M % 2 == 0) config_error("spectral operators need an odd node count");
    SpectralOps ops;
    ops.grid = grid;
    ops.y.resize(M);
    for (Eigen::Index i = 0; i < M; ++i) ops.y[i] = grid.axis(i);
    ops.center = (M - 1) / 2;
    ops.D1 = circulant(symbol_column(M, grid.spacing, 1));
    ops.D3 = circulant(symbol_column(M, grid.spacing, 3));
    ops.D4 = circulant(symbol_column(M, grid.spacing, 4));
    ops.P0 = circulant(symbol_column(M, grid.spacing, 0, 1));
    ops.P1 = circulant(symbol_column(M, grid.spacing, 1, 1));
    ops.P4 = circulant(symbol_column(M, grid.spacing, 4, 1));
    return ops;
}

Eigen::MatrixXd similarity_operator(const SpectralOps& ops, double alpha, double n) {
    const double beta = (1.0 - alpha * n) / 4.0;
    Eigen::MatrixXd L = -ops.D4 + beta * ops.D1 * ops.y.matrix().asDiagonal();
    L.diagonal().array() += alpha - beta;
    return L;
}

Eigen::MatrixXd preconditioned_operator(const SpectralOps& ops, double alpha, double n) {
    const double beta = (1.0 - alpha * n) / 4.0;
    return -ops.P4 + beta * ops.P1 * ops.y.matrix().asDiagonal() + (alpha - beta) * ops.P0;
}

Eigen::VectorXd thin_film_term(const SpectralOps& ops, const Eigen::VectorXd& f, double n, double eta) {
    const Eigen::ArrayXd w = 1.0 - (f.array().square() + eta * eta).pow(n / 2.0);
    return ops.D1 * (w * (ops.D3 * f).array()).matrix();
}

Eigen::VectorXd linearized_term(const SpectralOps& ops, const Eigen::VectorXd& psi, double mu, double eta) {
    const Eigen::ArrayXd lg = 0.5 * (psi.array().square() + eta * eta).log();
    const double alpha0 = 0.25;
    return -(ops.D1 * (lg * (ops.D3 * psi).array()).matrix()) -
           (alpha0 / 4.0) * (ops.y * (ops.D1 * psi).array()).matrix() + mu * psi;
}

PerturbationField solve_perturbation_k0(const KernelModel& model, double mu10, const ProfileConfig& cfg) {
    require_line(model);
    const GridSpec g = profile_grid(cfg);
    const SpectralOps ops = spectral_ops(g);
    const double h = g.spacing;
    const Eigen::VectorXd psi = eval_kernel(model, g).values.matrix();
    const Eigen::VectorXd rhs = linearized_term(ops, psi, mu10, cfg.eta);
    PerturbationField out;
    out.mu_used = mu10;
    out.solvability = h * rhs.sum();
    if (std::abs(out.solvability) > 1e-2 * std::abs(mu10))
        invariant_error("<N_0(psi_0), 1> = " + std::to_string(out.solvability) + " is not zero: inconsistent mu_{1,0}");
    const Eigen::VectorXd projected = rhs - (rhs.sum() / psi.sum()) * psi;
    const Eigen::MatrixXd B = similarity_operator(ops, 0.25, 0.0);
    const Bordered solver(preconditioned_operator(ops, 0.25, 0.0), Eigen::RowVectorXd::Constant(g.size(), h));
    const Eigen::VectorXd phi = solver.solve(-(ops.P0 * projected), 0.0);
    out.orthogonality = h * phi.sum();
    out.residual = l2(B * phi + projected, h);
    out.field = Field(g, phi.array());
    return out;
}

ProfileSolution fixed_point_profile(const KernelModel& model, double n, double alpha, const Field& init, double delta0,
                                    const ProfileConfig& cfg) {
    require_line(model);
    if (!(n >= 0.0 && n <= 0.5)) config_error("fixed-point profiles need n in [0, 0.5]");
    if (!(delta0 > 0.0)) config_error("delta0 must be positive");
    if (!(cfg.theta > 0.0 && cfg.theta <= 1.0)) config_error("damping theta must lie in (0, 1]");
    const GridSpec g = profile_grid(cfg);
    if (!(init.grid == g)) config_error("initial profile is not on the solver grid");
    const SpectralOps ops = spectral_ops(g);
    const double h = g.spacing;
    const Eigen::MatrixXd L = similarity_operator(ops, alpha, n);
    Eigen::RowVectorXd pin = Eigen::RowVectorXd::Zero(g.size());
    pin[ops.center] = 1.0;
    const Bordered solver(preconditioned_operator(ops, alpha, n), pin);

    Eigen::VectorXd f = init.values.matrix();
    if (f[ops.center] == 0.0) config_error("initial profile vanishes at the origin");
    f *= delta0 / f[ops.center];

    ProfileSolution s;
    s.n = n;
    s.alpha = alpha;
    s.beta_exp = (1.0 - n * alpha) / 4.0;
    s.theta = cfg.theta;
    s.normalization = delta0;
    for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        const Eigen::VectorXd next = solver.solve(-(ops.P0 * thin_film_term(ops, f, n, cfg.eta)), delta0);
        const Eigen::VectorXd damped = (1.0 - cfg.theta) * f + cfg.theta * next;
        s.last_change = l2(damped - f, h);
        f = damped;
        s.iterations = sweep;
        if (!f.allFinite() || l2(f, h) > cfg.divergence_bound)
            numerical_error("fixed-point iteration diverged at n = " + std::to_string(n));
        if (s.last_change < cfg.tolerance) break;
    }
    if (!(s.last_change < cfg.tolerance))
        numerical_error("fixed-point iteration did not converge in " + std::to_string(cfg.max_sweeps) + " sweeps");
    s.residual = max_residual(ops, L, f, n, cfg.eta);
    if (!(s.residual <= cfg.residual_tolerance))
        numerical_error("profile residual " + std::to_string(s.residual) + " above tolerance");
    s.mass = h * f.sum();
    s.field = Field(g, f.array());
    return s;
}

ProfileBranch continuation(const KernelModel& model, const std::vector<double>& n_grid, int N, const ProfileConfig& cfg) {
    require_line(model);
    if (N != model.dim) config_error("dimension differs from the kernel model");
    if (n_grid.empty() || n_grid.front() < 0.0) config_error("n grid must start at n >= 0");
    for (std::size_t i = 1; i < n_grid.size(); ++i)
        if (!(n_grid[i] > n_grid[i - 1])) config_error("n grid must be increasing");
    const GridSpec g = profile_grid(cfg);
    const Field F = eval_kernel(model, g);
    const double delta0 = F.values[(g.size() - 1) / 2];
    ProfileBranch branch;
    Field start = F;
    for (double n : n_grid) {
        try {
            ProfileSolution s = fixed_point_profile(model, n, alpha_mass(N, n).alpha, start, delta0, cfg);
            if (!branch.solutions.empty())
                branch.increments.push_back(l2((s.field.values - branch.solutions.back().field.values).matrix(), g.spacing));
            start = s.field;
            branch.solutions.push_back(std::move(s));
        } catch (const Error& e) {
            branch.complete = false;
            branch.error = e.what();
            branch.error_kind = e.kind();
            break;
        }
    }
    return branch;
}

OscillationReport oscillation_report(const ProfileSolution& sol) {
    const Field& f = sol.field;
    const GridSpec& g = f.grid;
    const Eigen::Index M = f.size();
    OscillationReport r;
    const double floor = 1e-9 * f.values.abs().maxCoeff();
    Eigen::Index last = 0;
    for (Eigen::Index i = 0; i < M; ++i)
        if (std::abs(f.values[i]) > floor) last = i;
    r.support_edge = g.axis(last);
    const Eigen::Index first = (M - 1) / 2;
    for (Eigen::Index i = 0; i + 1 < M; ++i) {
        const double a = f.values[i], b = f.values[i + 1];
        if (std::abs(a) <= floor && std::abs(b) <= floor) continue;
        if (a * b < 0.0) r.sign_changes.push_back(g.axis(i) + g.spacing * a / (a - b));
    }
    Eigen::Index start = first;
    for (double z : r.sign_changes) {
        if (z <= 0.0) continue;
        Eigen::Index best = start;
        for (Eigen::Index i = start; i < M && g.axis(i) < z; ++i)
            if (std::abs(f.values[i]) > std::abs(f.values[best])) best = i;
        r.extrema_at.push_back(g.axis(best));
        r.amplitudes.push_back(std::abs(f.values[best]));
        while (start < M && g.axis(start) < z) ++start;
    }
    for (std::size_t i = 1; i < r.amplitudes.size(); ++i)
        r.envelope_decreasing = r.envelope_decreasing && r.amplitudes[i] < r.amplitudes[i - 1];
    std::vector<double> pos;
    for (double z : r.sign_changes)
        if (z > 0.0) pos.push_back(z);
    for (std::size_t i = 2; i < pos.size(); ++i) r.spacing_ratios.push_back((pos[i] - pos[i - 1]) / (pos[i - 1] - pos[i - 2]));
    std::vector<double> lx, ly;
    for (std::size_t i = r.amplitudes.size() / 2; i < r.amplitudes.size(); ++i)
        if (r.extrema_at[i] > 0.0) {
            lx.push_back(std::log(r.extrema_at[i]));
            ly.push_back(std::log(r.amplitudes[i]));
        }
    if (lx.size() >= 2) r.decay_order = fit_line(lx, ly).second;
    return r;
}

}  // namespace simfilm
