#include "simfilm/semigroup.hpp"

#include <cmath>

namespace simfilm {

double MomentSet::operator[](const MultiIndex& beta) const {
    for (std::size_t i = 0; i < indices.size(); ++i)
        if (indices[i] == beta) return values[i];
    config_error("moment " + beta.str() + " was not computed");
}

namespace {

void require_compact(const Field& u) {
    const GridSpec& g = u.grid;
    const double cap = 1e-14 * std::max(1e-300, u.values.abs().maxCoeff());
    const Eigen::Index n = g.axis_count();
    auto bad = [&](Eigen::Index p) { return std::abs(u.values[p]) > cap; };
    if (g.kind == GridKind::Uniform1D) {
        if (bad(0) || bad(n - 1)) config_error("initial datum touches the grid boundary");
    } else if (g.kind == GridKind::Tensor2D) {
        for (Eigen::Index i = 0; i < n; ++i)
            if (bad(i) || bad((n - 1) * n + i) || bad(i * n) || bad(i * n + n - 1))
                config_error("initial datum touches the grid boundary");
    } else {
        config_error("moments need a uniform-1d or tensor-2d grid");
    }
}

double monomial(const MultiIndex& b, double y1, double y2) {
    double t = 1.0;
    for (int i = 0; i < b[0]; ++i) t *= y1;
    if (b.dim > 1)
        for (int i = 0; i < b[1]; ++i) t *= y2;
    return t;
}

}  // namespace

double momentum(const Field& u0, const MultiIndex& beta) {
    if (beta.dim != u0.dim()) config_error("multi-index dimension does not match the datum");
    require_compact(u0);
    const double s = integrate_with(u0, [&beta](double y1, double y2) { return monomial(beta, y1, y2); });
    return s / std::sqrt(static_cast<double>(beta.factorial()));
}

MomentSet moments(const Field& u0, int K, std::string source) {
    MomentSet m;
    m.source = std::move(source);
    m.indices = multi_indices_upto(u0.dim(), K);
    for (const auto& b : m.indices) m.values.push_back(momentum(u0, b));
    return m;
}

Field evolve_expansion(const EigenPairSet& pairs, const Field& u0, double tau, int K) {
    if (tau < 0) config_error("tau must be non-negative");
    if (K > pairs.max_order) config_error("truncation order exceeds the eigenpair set");
    const MomentSet M = moments(u0, K);
    Eigen::ArrayXd w = Eigen::ArrayXd::Zero(pairs.grid.size());
    for (std::size_t i = 0; i < M.indices.size(); ++i) {
        const Eigen::Index k = pairs.index_of(M.indices[i]);
        const double decay = std::exp(pairs.eigenvalues[static_cast<std::size_t>(k)].value() * tau);
        w += decay * M.values[i] * pairs.eigenfunctions[static_cast<std::size_t>(k)].values;
    }
    return Field(pairs.grid, std::move(w));
}

Field evolve_convolution(const KernelModel& model, const Field& u0, double tau, const GridSpec& out) {
    if (!(tau > 0)) config_error("the convolution form needs tau > 0");
    if (u0.dim() != model.dim || out.dim() != model.dim) config_error("grid dimension does not match the kernel");
    require_compact(u0);
    const double s = std::exp(-tau / (2.0 * model.order));
    const double cap = 1e-300;
    std::vector<std::array<double, 2>> z;
    std::vector<double> wz;
    const double cell = model.dim == 1 ? u0.grid.spacing : u0.grid.spacing * u0.grid.spacing;
    for (Eigen::Index p = 0; p < u0.size(); ++p)
        if (std::abs(u0.values[p]) > cap) {
            const auto y = u0.grid.point(p);
            z.push_back({s * y[0], s * y[1]});
            wz.push_back(u0.values[p] * cell);
        }
    Eigen::ArrayXd w = Eigen::ArrayXd::Zero(out.size());
    if (model.dim == 1) {
        double reach = 0.0;
        for (const auto& q : z) reach = std::max(reach, std::abs(q[0]));
        const auto tab = tabulate_line(model, 0, out.half_width + reach + 0.01, 4e-3);
        for (Eigen::Index p = 0; p < out.size(); ++p) {
            const double y = out.axis(p);
            double acc = 0.0;
            for (std::size_t j = 0; j < z.size(); ++j) acc += wz[j] * tab[0](y - z[j][0]);
            w[p] = acc;
        }
    } else {
        const MultiIndex zero = MultiIndex::zero(2);
        for (Eigen::Index p = 0; p < out.size(); ++p) {
            const auto y = out.point(p);
            double acc = 0.0;
            for (std::size_t j = 0; j < z.size(); ++j)
                acc += wz[j] * kernel_derivative(model, zero, y[0] - z[j][0], y[1] - z[j][1]);
            w[p] = acc;
        }
    }
    return Field(out, std::move(w));
}

EvolutionComparison compare(const Field& expansion, const Field& convolution, double tau, int K) {
    require_same_grid(expansion, convolution);
    const Field d = combine(1.0, expansion, -1.0, convolution);
    EvolutionComparison c;
    c.tau = tau;
    c.truncation = K;
    c.l2_error = l2_norm(d);
    c.linf_error = d.values.abs().maxCoeff();
    return c;
}

Field bump(const GridSpec& grid, int derivative) {
    if (derivative < 0) config_error("derivative order must be non-negative");
    if (grid.kind == GridKind::Tensor2D) {
        if (derivative != 0) config_error("bump derivatives are only provided in one dimension");
        Field b = sample(grid, [](double y1, double y2) {
            const double r2 = y1 * y1 + y2 * y2;
            return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0;
        });
        return scaled(1.0 / integrate(b), b);
    }
    // b^{(j)} = q_j(z) b / (1 - z^2)^{2j},  q_{j+1} = q_j' s^2 + 4 j z s q_j - 2 z q_j,  s = 1 - z^2.
    std::vector<double> q{1.0};
    for (int j = 0; j < derivative; ++j) {
        std::vector<double> next(q.size() + 3, 0.0);
        for (std::size_t k = 0; k < q.size(); ++k) {
            const double c = q[k];
            if (k >= 1) {
                const double d = c * static_cast<double>(k);  // derivative term z^{k-1}
                next[k - 1] += d;
                next[k + 1] -= 2.0 * d;
                next[k + 3] += d;
            }
            next[k + 1] += 4.0 * j * c;
            next[k + 3] -= 4.0 * j * c;
            next[k + 1] -= 2.0 * c;
        }
        q.swap(next);
    }
    return sample(grid, [&q, derivative](double z, double) {
        if (std::abs(z) >= 1.0) return 0.0;
        const double s = 1.0 - z * z;
        const double b = std::exp(-1.0 / s);
        if (b == 0.0) return 0.0;
        double poly = 0.0;
        for (std::size_t k = q.size(); k-- > 0;) poly = poly * z + q[k];
        return poly * b / std::pow(s, 2 * derivative) / kBumpMass;
    });
}

double log_slope(const std::vector<double>& taus, const std::vector<double>& values) {
    std::vector<double> l;
    for (double v : values) {
        if (!(v > 0)) numerical_error("log slope needs positive values");
        l.push_back(std::log(v));
    }
    return fit_line(taus, l).second;
}

GridSpec default_data_grid(int dim) {
    return dim == 1 ? GridSpec::uniform(2.0, 400) : GridSpec::tensor(2.0, 80);
}

}  // namespace simfilm
