#include "simfilm/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace simfilm {

namespace {

constexpr int kPanelOrder = 16;

void check_beta(const KernelModel& model, const MultiIndex& beta) {
    if (beta.dim != model.dim) config_error("multi-index dimension does not match the kernel");
    if (beta.order() > model.max_deriv)
        config_error("derivative order " + std::to_string(beta.order()) + " exceeds max_deriv " +
                     std::to_string(model.max_deriv));
}

std::shared_ptr<const RadialTables> build_radial_tables(const KernelModel& m, double extent, double spacing) {
    auto out = std::make_shared<RadialTables>();
    const int P = m.max_deriv;
    out->spacing = spacing;
    out->max_order = P;
    const auto n = static_cast<Eigen::Index>(std::ceil(extent / spacing)) + 4;
    out->extent = spacing * static_cast<double>(n - 3);

    // Keep only nodes whose weight can matter at double precision.
    std::vector<double> s, w;
    for (Eigen::Index j = 0; j < m.freq_nodes.size(); ++j) {
        const double sj = m.freq_nodes[j];
        const double mag = std::abs(m.freq_weights[j]) * std::pow(std::max(1.0, sj), P);
        if (mag > 1e-40) {
            s.push_back(sj);
            w.push_back(m.freq_weights[j]);
        }
    }
    const std::size_t nodes = s.size();
    std::vector<double> wpow((P + 1) * nodes);
    for (std::size_t j = 0; j < nodes; ++j) {
        double v = w[j];
        for (int p = 0; p <= P; ++p) {
            wpow[static_cast<std::size_t>(p) * nodes + j] = v;
            v *= s[j];
        }
    }

    std::vector<std::vector<Eigen::ArrayXd>> raw(static_cast<std::size_t>(P + 1));
    for (int p = 0; p <= P; ++p) {
        raw[static_cast<std::size_t>(p)].resize(static_cast<std::size_t>(P + 1));
        for (int k = p % 2; k <= p; k += 2) raw[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)] = Eigen::ArrayXd::Zero(n);
    }
    std::vector<double> J(static_cast<std::size_t>(P + 1));
    std::vector<double> acc(static_cast<std::size_t>((P + 1) * (P + 1)));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = spacing * static_cast<double>(i);
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t j = 0; j < nodes; ++j) {
            bessel_j_sequence(r * s[j], P, J.data());
            for (int p = 0; p <= P; ++p) {
                const double wp = wpow[static_cast<std::size_t>(p) * nodes + j];
                double* a = &acc[static_cast<std::size_t>(p * (P + 1))];
                for (int k = p % 2; k <= p; k += 2) a[k] += wp * J[static_cast<std::size_t>(k)];
            }
        }
        for (int p = 0; p <= P; ++p)
            for (int k = p % 2; k <= p; k += 2)
                raw[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)][i] =
                    acc[static_cast<std::size_t>(p * (P + 1) + k)];
    }
    out->tables.resize(static_cast<std::size_t>(P + 1));
    for (int p = 0; p <= P; ++p) {
        out->tables[static_cast<std::size_t>(p)].resize(static_cast<std::size_t>(P + 1));
        for (int k = p % 2; k <= p; k += 2)
            out->tables[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)] = RadialTable<double>(
                spacing, std::move(raw[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)]), k % 2 ? -1 : 1);
    }
    return out;
}

double eval_2d(const KernelModel& m, const std::vector<AngularTerm>& terms, int p, double y1, double y2) {
    const RadialTables& t = *m.radial;
    const double r = std::hypot(y1, y2);
    if (r > t.extent) numerical_error("point beyond the cached radial table extent");
    const auto st = t.tables[static_cast<std::size_t>(p)][static_cast<std::size_t>(terms.front().k)].stencil(r);
    const std::complex<double> e = r > 0 ? std::complex<double>(y1 / r, y2 / r) : std::complex<double>(1.0, 0.0);
    double v = 0.0;
    for (const auto& term : terms) {
        const std::complex<double> rot = std::pow(e, term.k);
        v += (term.a * rot).real() * t.tables[static_cast<std::size_t>(p)][static_cast<std::size_t>(term.k)].apply(st);
    }
    return v;
}

// Height of the saddle of i y xi - xi^{2m} in the upper half plane.
double saddle_height(double y, int m) {
    const double q = 2.0 * m - 1.0;
    return std::pow(y / (2.0 * m), 1.0 / q) * std::sin(std::numbers::pi / (2.0 * q));
}

// Log-magnitude of the integrand at the saddle, roughly log|F(y)|.
double saddle_exponent(double y, int m) {
    const double q = 2.0 * m - 1.0;
    const std::complex<double> xi0 = std::polar(std::pow(y / (2.0 * m), 1.0 / q), std::numbers::pi / (2.0 * q));
    return (std::complex<double>(0.0, y) * xi0 - std::pow(xi0, 2 * m)).real();
}

std::shared_ptr<const LineContours> build_line_contours(int order, double cutoff, int nodes, double extent) {
    auto lc = std::make_shared<LineContours>();
    lc->dx = cutoff / nodes;
    lc->eta_step = order == 1 ? 0.5 : 0.05;
    lc->y_cap = extent;
    if (saddle_exponent(extent, order) < -745.0) {
        double lo = 0.0, hi = extent;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            (saddle_exponent(mid, order) < -745.0 ? hi : lo) = mid;
        }
        lc->y_cap = hi;
    }
    const int levels = static_cast<int>(std::ceil(saddle_height(lc->y_cap, order) / lc->eta_step)) + 1;
    for (int l = 0; l < levels; ++l) {
        const double eta = l * lc->eta_step;
        std::vector<std::complex<double>> w;
        double peak = -1e300;
        for (long j = 0;; ++j) {
            const double x = static_cast<double>(j) * lc->dx;
            const std::complex<double> e = -std::pow(std::complex<double>(x, eta), 2 * order);
            peak = std::max(peak, e.real());
            if (e.real() < peak - 60.0) break;
            w.push_back(std::exp(e) * (lc->dx / std::numbers::pi) * (j == 0 ? 0.5 : 1.0));
        }
        lc->weights.emplace_back(Eigen::Map<Eigen::ArrayXcd>(w.data(), static_cast<Eigen::Index>(w.size())));
    }
    return lc;
}

}  // namespace

double default_freq_cutoff(int order) { return order == 1 ? 7.0 : 4.0; }
int default_node_count(int dim) { return dim == 2 ? 512 : 2048; }
double default_radial_extent() { return 60.0; }

KernelModel build_kernel(int dim, int order, double freq_cutoff, int node_count, int max_deriv,
                         const KernelOptions& options) {
    if (dim != 1 && dim != 2) config_error("kernel dimension must be 1 or 2");
    if (order != 1 && order != 2) config_error("polyharmonic order must be 1 or 2");
    if (!(freq_cutoff >= 4.0)) config_error("frequency cutoff below 4 under-resolves the kernel");
    if (node_count < 256) config_error("node count below 256 under-resolves the kernel");
    if (max_deriv < 0 || max_deriv > 16) config_error("max_deriv must lie in [0, 16]");

    KernelModel m;
    m.dim = dim;
    m.order = order;
    m.freq_cutoff = freq_cutoff;
    m.max_deriv = max_deriv;
    const double two_m = 2.0 * order;
    if (dim == 1) {
        m.node_count = node_count;
        const double d = freq_cutoff / node_count;
        m.freq_nodes = Eigen::ArrayXd::LinSpaced(node_count + 1, 0.0, freq_cutoff);
        m.freq_weights = (-m.freq_nodes.pow(two_m)).exp() * (d / std::numbers::pi);
        m.freq_weights[0] *= 0.5;
        m.freq_weights[node_count] *= 0.5;
        m.eval_extent = options.eval_extent > 0 ? options.eval_extent : 200.0;
        m.line = build_line_contours(order, freq_cutoff, node_count, m.eval_extent);
    } else {
        const int panels = (node_count + kPanelOrder - 1) / kPanelOrder;
        m.node_count = panels * kPanelOrder;
        const GaussRule rule = composite_gauss(0.0, freq_cutoff, panels, kPanelOrder);
        m.freq_nodes = rule.nodes;
        m.freq_weights = rule.weights * rule.nodes * (-rule.nodes.pow(two_m)).exp() / (2.0 * std::numbers::pi);
        const double extent = options.radial_extent > 0 ? options.radial_extent : default_radial_extent();
        if (!(options.radial_spacing > 0)) config_error("radial table spacing must be positive");
        m.radial = build_radial_tables(m, extent, options.radial_spacing);
        m.eval_extent = m.radial->extent;
    }
    return m;
}

KernelModel build_kernel(int dim, int order, int max_deriv, const KernelOptions& options) {
    return build_kernel(dim, order, default_freq_cutoff(order), default_node_count(dim), max_deriv, options);
}

void kernel_derivatives_1d(const KernelModel& model, double y, int max_order, double* out) {
    if (model.dim != 1) config_error("line evaluation needs a one-dimensional kernel");
    if (max_order > model.max_deriv) config_error("derivative order exceeds max_deriv");
    if (std::abs(y) > model.eval_extent) numerical_error("point beyond the kernel evaluation extent");
    const LineContours& lc = *model.line;
    const double ay = std::abs(y);
    const auto top = static_cast<long>(lc.weights.size()) - 1;
    const long level = std::clamp(std::lround(saddle_height(std::min(ay, lc.y_cap), model.order) / lc.eta_step), 0L, top);
    const double eta = static_cast<double>(level) * lc.eta_step;
    const Eigen::ArrayXcd& W = lc.weights[static_cast<std::size_t>(level)];
    const std::complex<double> step = std::polar(1.0, ay * lc.dx);
    std::complex<double> z(1.0, 0.0);
    std::complex<double> acc[17] = {};
    for (Eigen::Index j = 0; j < W.size(); ++j) {
        const double x = static_cast<double>(j) * lc.dx;
        if (j % 64 == 0) z = std::polar(1.0, ay * x);
        std::complex<double> u = W[j] * z;
        const std::complex<double> it(-eta, x);
        for (int p = 0; p <= max_order; ++p) {
            acc[p] += u;
            u *= it;
        }
        z *= step;
    }
    const double damp = std::exp(-ay * eta);
    for (int p = 0; p <= max_order; ++p) {
        const double v = acc[p].real() * damp;
        out[p] = (y < 0 && (p & 1)) ? -v : v;
    }
}

std::vector<AngularTerm> angular_terms(const MultiIndex& beta) {
    if (beta.dim != 2) config_error("angular expansion needs a two-dimensional multi-index");
    const int p = beta.order();
    // Laurent coefficients of cos^a sin^b in z = e^{i theta}, offset by p.
    std::vector<std::complex<double>> poly(static_cast<std::size_t>(2 * p + 1), 0.0);
    poly[static_cast<std::size_t>(p)] = 1.0;
    auto multiply = [&](std::complex<double> plus, std::complex<double> minus) {
        std::vector<std::complex<double>> next(poly.size(), 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            if (poly[i] == 0.0) continue;
            if (i + 1 < poly.size()) next[i + 1] += poly[i] * plus;
            if (i >= 1) next[i - 1] += poly[i] * minus;
        }
        poly.swap(next);
    };
    const std::complex<double> I(0.0, 1.0);
    for (int i = 0; i < beta[0]; ++i) multiply(0.5, 0.5);
    for (int i = 0; i < beta[1]; ++i) multiply(1.0 / (2.0 * I), -1.0 / (2.0 * I));
    auto ipow = [&](int e) {
        static const std::complex<double> cyc[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        return cyc[((e % 4) + 4) % 4];
    };
    std::vector<AngularTerm> out;
    for (int k = p % 2; k <= p; k += 2) {
        const std::complex<double> ck = poly[static_cast<std::size_t>(p + k)];
        const std::complex<double> cmk = poly[static_cast<std::size_t>(p - k)];
        std::complex<double> a = ck * ipow(p + k);
        if (k > 0) a += std::conj(cmk * ipow(p + k));
        if (std::abs(a) > 1e-15) out.push_back({k, a});
    }
    if (out.empty()) out.push_back({p % 2, 0.0});
    return out;
}

double kernel_derivative(const KernelModel& model, const MultiIndex& beta, double y1, double y2) {
    check_beta(model, beta);
    if (model.dim == 1) {
        double vals[17];
        kernel_derivatives_1d(model, y1, beta.order(), vals);
        return vals[beta.order()];
    }
    return eval_2d(model, angular_terms(beta), beta.order(), y1, y2);
}

std::vector<Field> eval_derivatives(const KernelModel& model, const std::vector<MultiIndex>& betas,
                                    const GridSpec& grid) {
    for (const auto& b : betas) check_beta(model, b);
    std::vector<Eigen::ArrayXd> vals(betas.size(), Eigen::ArrayXd(grid.size()));
    if (model.dim == 1) {
        if (grid.kind == GridKind::Tensor2D) config_error("a one-dimensional kernel cannot fill a tensor grid");
        int P = 0;
        for (const auto& b : betas) P = std::max(P, b.order());
        double d[17];
        for (Eigen::Index i = 0; i < grid.size(); ++i) {
            kernel_derivatives_1d(model, grid.axis(i), P, d);
            for (std::size_t q = 0; q < betas.size(); ++q) vals[q][i] = d[betas[q].order()];
        }
    } else {
        if (grid.kind == GridKind::Uniform1D) config_error("a two-dimensional kernel needs a radial or tensor grid");
        const RadialTables& t = *model.radial;
        std::vector<std::vector<AngularTerm>> ang;
        int kmax = 0;
        for (const auto& b : betas) {
            ang.push_back(angular_terms(b));
            for (const auto& term : ang.back()) kmax = std::max(kmax, term.k);
        }
        std::vector<std::complex<double>> rot(static_cast<std::size_t>(kmax + 1));
        const RadialTable<double>& probe = t.tables[0][0];
        for (Eigen::Index i = 0; i < grid.size(); ++i) {
            const auto y = grid.point(i);
            const double r = std::hypot(y[0], y[1]);
            if (r > t.extent) numerical_error("point beyond the cached radial table extent");
            const auto st = probe.stencil(r);
            const std::complex<double> e = r > 0 ? std::complex<double>(y[0] / r, y[1] / r) : std::complex<double>(1.0, 0.0);
            rot[0] = 1.0;
            for (int k = 1; k <= kmax; ++k) rot[static_cast<std::size_t>(k)] = rot[static_cast<std::size_t>(k - 1)] * e;
            for (std::size_t q = 0; q < betas.size(); ++q) {
                const int p = betas[q].order();
                double v = 0.0;
                for (const auto& term : ang[q])
                    v += (term.a * rot[static_cast<std::size_t>(term.k)]).real() *
                         t.tables[static_cast<std::size_t>(p)][static_cast<std::size_t>(term.k)].apply(st);
                vals[q][i] = v;
            }
        }
    }
    std::vector<Field> out;
    out.reserve(betas.size());
    for (std::size_t q = 0; q < betas.size(); ++q)
        out.emplace_back(grid, std::move(vals[q]), KernelTerms{{betas[q], 1.0}});
    return out;
}

Field eval_terms(const KernelModel& model, const KernelTerms& terms, const GridSpec& grid) {
    std::vector<MultiIndex> betas;
    for (const auto& [b, c] : terms)
        if (std::find(betas.begin(), betas.end(), b) == betas.end()) betas.push_back(b);
    const auto vals = eval_derivatives(model, betas, grid);
    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(grid.size());
    for (const auto& [b, c] : terms)
        out += c * vals[static_cast<std::size_t>(std::find(betas.begin(), betas.end(), b) - betas.begin())].values;
    return Field(grid, std::move(out), terms);
}

KernelTerms shift_terms(const KernelTerms& terms, int axis, int by) {
    KernelTerms out = terms;
    for (auto& entry : out) {
        if (axis < 0 || axis >= entry.first.dim) config_error("derivative axis out of range");
        entry.first.c[static_cast<std::size_t>(axis)] += by;
    }
    return out;
}

Field differentiate(const KernelModel& model, const Field& field, int axis) {
    if (!field.has_terms()) config_error("differentiation needs a field with kernel-derivative metadata");
    return eval_terms(model, shift_terms(field.terms, axis), field.grid);
}

Field eval_derivative(const KernelModel& model, const MultiIndex& beta, const GridSpec& grid) {
    return std::move(eval_derivatives(model, {beta}, grid).front());
}

Field eval_kernel(const KernelModel& model, const GridSpec& grid) {
    return eval_derivative(model, MultiIndex::zero(model.dim), grid);
}

std::vector<RadialTable<double>> tabulate_line(const KernelModel& model, int max_order, double extent,
                                               double spacing) {
    if (model.dim != 1) config_error("line tables need a one-dimensional kernel");
    if (max_order > model.max_deriv) config_error("derivative order exceeds max_deriv");
    const auto n = static_cast<Eigen::Index>(std::ceil(extent / spacing)) + 4;
    std::vector<Eigen::ArrayXd> cols(static_cast<std::size_t>(max_order + 1), Eigen::ArrayXd(n));
    double d[17];
    for (Eigen::Index i = 0; i < n; ++i) {
        kernel_derivatives_1d(model, spacing * static_cast<double>(i), max_order, d);
        for (int p = 0; p <= max_order; ++p) cols[static_cast<std::size_t>(p)][i] = d[p];
    }
    std::vector<RadialTable<double>> out;
    for (int p = 0; p <= max_order; ++p)
        out.emplace_back(spacing, std::move(cols[static_cast<std::size_t>(p)]), p % 2 ? -1 : 1);
    return out;
}

namespace {

struct Sample {
    double r;
    double v;
};

std::pair<double, double> fit_law(const std::vector<Sample>& pts, double a, double& rms) {
    std::vector<double> x, y;
    for (const auto& s : pts) {
        x.push_back(std::pow(s.r, a));
        y.push_back(std::log(std::abs(s.v)));
    }
    const auto [c0, c1] = fit_line(x, y);
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ss += std::pow(y[i] - (c0 + c1 * x[i]), 2);
    rms = std::sqrt(ss / static_cast<double>(x.size()));
    return {std::exp(c0), -c1};
}

}  // namespace

EnvelopeReport check_decay_envelope(const Field& field, const EnvelopeOptions& opt) {
    std::vector<std::vector<Sample>> branches;
    const GridSpec& g = field.grid;
    if (g.kind == GridKind::Tensor2D) {
        const Eigen::Index n = g.axis_count(), mid = n / 2;
        std::vector<Sample> right, left;
        for (Eigen::Index i = mid; i < n; ++i) right.push_back({std::abs(g.axis(i)), field.values[i * n + mid]});
        for (Eigen::Index i = mid; i >= 0; --i) left.push_back({std::abs(g.axis(i)), field.values[i * n + mid]});
        branches = {right, left};
    } else if (g.kind == GridKind::Radial) {
        std::vector<Sample> right;
        for (Eigen::Index i = 0; i < g.size(); ++i) right.push_back({g.axis(i), field.values[i]});
        branches = {right};
    } else {
        const Eigen::Index n = g.size(), mid = n / 2;
        std::vector<Sample> right, left;
        for (Eigen::Index i = mid; i < n; ++i) right.push_back({std::abs(g.axis(i)), field.values[i]});
        for (Eigen::Index i = mid; i >= 0; --i) left.push_back({std::abs(g.axis(i)), field.values[i]});
        branches = {right, left};
    }
    double rmax = 0.0, fmax = 0.0;
    for (const auto& b : branches)
        for (const auto& s : b) {
            rmax = std::max(rmax, s.r);
            fmax = std::max(fmax, std::abs(s.v));
        }
    if (rmax < 10.0) config_error("envelope check needs a sample extent of at least 10");
    if (!(fmax > 0)) numerical_error("envelope check on an identically zero field");
    const double floor = opt.floor * fmax;

    std::vector<Sample> extrema, tail;
    int sign_changes = 0;
    for (const auto& b : branches) {
        int last_sign = 0;
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (b[i].r < opt.tail_start || std::abs(b[i].v) <= floor) continue;
            tail.push_back(b[i]);
            const int sg = b[i].v > 0 ? 1 : -1;
            if (last_sign != 0 && sg != last_sign) ++sign_changes;
            last_sign = sg;
            if (i == 0 || i + 1 >= b.size()) continue;
            const double am = std::abs(b[i - 1].v), a0 = std::abs(b[i].v), ap = std::abs(b[i + 1].v);
            if (a0 >= am && a0 > ap) {
                // Parabolic refinement of the peak of |f|.
                const double den = am - 2.0 * a0 + ap;
                double shift = den != 0.0 ? 0.5 * (am - ap) / den : 0.0;
                shift = std::clamp(shift, -0.5, 0.5);
                const double h = b[i + 1].r - b[i].r;
                const double peak = a0 - 0.25 * (am - ap) * shift;
                extrema.push_back({b[i].r + shift * h, peak});
            }
        }
    }
    EnvelopeReport rep;
    rep.oscillatory = sign_changes > 0;
    const std::vector<Sample>* pts = &extrema;
    if (!rep.oscillatory) pts = &tail;
    if (pts->size() < 3) numerical_error("too few tail extrema (< 3) to fit the decay envelope");
    rep.extrema_used = static_cast<int>(pts->size());

    const auto [D, d] = fit_law(*pts, opt.exponent, rep.fit_rms);
    rep.fitted_D = D;
    rep.fitted_d = d;
    double alt_rms = 0.0;
    rep.alternative_d = fit_law(*pts, opt.alternative_exponent, alt_rms).second;
    rep.alternative_rms = alt_rms;
    rep.law_mismatch = alt_rms < rep.fit_rms;
    if (!(d > 0)) numerical_error("fitted envelope does not decay");
    double viol = 0.0;
    for (const auto& s : tail)
        viol = std::max(viol, std::log(std::abs(s.v)) - (std::log(D) - d * std::pow(s.r, opt.exponent)));
    rep.residual = viol;
    return rep;
}

}  // namespace simfilm
