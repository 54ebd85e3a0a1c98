#include "simfilm/core.hpp"

#include <cmath>
#include <sstream>

namespace simfilm {

MultiIndex::MultiIndex(std::initializer_list<int> parts) {
    if (parts.size() < 1 || parts.size() > 2) config_error("multi-index must have 1 or 2 components");
    dim = static_cast<int>(parts.size());
    int i = 0;
    for (int v : parts) {
        if (v < 0) config_error("multi-index components must be non-negative");
        c[static_cast<std::size_t>(i++)] = v;
    }
}

MultiIndex MultiIndex::zero(int d) {
    if (d < 1 || d > 2) config_error("unsupported dimension " + std::to_string(d));
    MultiIndex m;
    m.dim = d;
    return m;
}

std::int64_t MultiIndex::factorial() const {
    std::int64_t f = 1;
    for (int i = 0; i < dim; ++i)
        for (int k = 2; k <= c[static_cast<std::size_t>(i)]; ++k) f *= k;
    return f;
}

std::string MultiIndex::str() const {
    std::ostringstream os;
    os << "(" << c[0];
    if (dim > 1) os << "," << c[1];
    os << ")";
    return os.str();
}

bool graded_lex_less(const MultiIndex& a, const MultiIndex& b) {
    if (a.order() != b.order()) return a.order() < b.order();
    return a.c[0] > b.c[0];
}

std::vector<MultiIndex> multi_indices(int dim, int k) {
    std::vector<MultiIndex> out;
    if (dim == 1) {
        out.push_back(MultiIndex{k});
    } else if (dim == 2) {
        for (int a = k; a >= 0; --a) out.push_back(MultiIndex{a, k - a});
    } else {
        config_error("unsupported dimension " + std::to_string(dim));
    }
    return out;
}

std::vector<MultiIndex> multi_indices_upto(int dim, int K) {
    std::vector<MultiIndex> out;
    for (int k = 0; k <= K; ++k) {
        auto level = multi_indices(dim, k);
        out.insert(out.end(), level.begin(), level.end());
    }
    return out;
}

Rational::Rational(std::int64_t n, std::int64_t d) {
    if (d == 0) numerical_error("rational with zero denominator");
    if (d < 0) {
        n = -n;
        d = -d;
    }
    const std::int64_t g = std::gcd(n < 0 ? -n : n, d);
    num = g ? n / g : 0;
    den = g ? d / g : 1;
}

std::string Rational::str() const {
    return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
}

Rational operator+(Rational a, Rational b) {
    const std::int64_t g = std::gcd(a.den, b.den);
    return Rational(a.num * (b.den / g) + b.num * (a.den / g), a.den / g * b.den);
}
Rational operator-(Rational a, Rational b) { return a + (-b); }
Rational operator*(Rational a, Rational b) {
    const std::int64_t g1 = std::gcd(a.num < 0 ? -a.num : a.num, b.den);
    const std::int64_t g2 = std::gcd(b.num < 0 ? -b.num : b.num, a.den);
    const std::int64_t d1 = g1 ? g1 : 1, d2 = g2 ? g2 : 1;
    return Rational((a.num / d1) * (b.num / d2), (a.den / d2) * (b.den / d1));
}
Rational operator/(Rational a, Rational b) {
    if (b.num == 0) numerical_error("rational division by zero");
    return a * Rational(b.den, b.num);
}

std::string to_string(GridKind kind) {
    switch (kind) {
        case GridKind::Uniform1D: return "uniform-1d";
        case GridKind::Radial: return "radial";
        case GridKind::Tensor2D: return "tensor-2d";
    }
    return "unknown";
}

namespace {

GridSpec make_grid(GridKind kind, double L, Eigen::Index cells) {
    if (!(L > 0.0) || !std::isfinite(L)) config_error("grid half-width must be positive");
    if (cells < 2) config_error("grid needs at least 2 cells");
    GridSpec g;
    g.kind = kind;
    g.half_width = L;
    g.spacing = (kind == GridKind::Radial ? L : 2.0 * L) / static_cast<double>(cells);
    return g;
}

}  // namespace

GridSpec GridSpec::uniform(double L, Eigen::Index cells) { return make_grid(GridKind::Uniform1D, L, cells); }
GridSpec GridSpec::tensor(double L, Eigen::Index cells) { return make_grid(GridKind::Tensor2D, L, cells); }
GridSpec GridSpec::radial(double L, Eigen::Index cells) { return make_grid(GridKind::Radial, L, cells); }

Eigen::Index GridSpec::cells() const {
    const double span = kind == GridKind::Radial ? half_width : 2.0 * half_width;
    return static_cast<Eigen::Index>(std::llround(span / spacing));
}

Eigen::Index GridSpec::size() const {
    const Eigen::Index n = axis_count();
    return kind == GridKind::Tensor2D ? n * n : n;
}

double GridSpec::axis(Eigen::Index i) const {
    const double origin = kind == GridKind::Radial ? 0.0 : -half_width;
    return origin + static_cast<double>(i) * spacing;
}

std::array<double, 2> GridSpec::point(Eigen::Index p) const {
    if (kind == GridKind::Tensor2D) {
        const Eigen::Index n = axis_count();
        return {axis(p / n), axis(p % n)};
    }
    return {axis(p), 0.0};
}

bool GridSpec::operator==(const GridSpec& o) const {
    return kind == o.kind && cells() == o.cells() && std::abs(half_width - o.half_width) <= 1e-12 * half_width;
}

void require_same_grid(const Field& a, const Field& b) {
    if (!(a.grid == b.grid)) config_error("fields live on different grids");
}

namespace {

KernelTerms merge_terms(double a, const KernelTerms& x, double b, const KernelTerms& y) {
    KernelTerms out;
    auto add = [&out](const MultiIndex& m, double c) {
        for (auto& [k, v] : out)
            if (k == m) {
                v += c;
                return;
            }
        out.emplace_back(m, c);
    };
    for (const auto& [m, c] : x) add(m, a * c);
    for (const auto& [m, c] : y) add(m, b * c);
    return out;
}

}  // namespace

Field combine(double a, const Field& x, double b, const Field& y) {
    require_same_grid(x, y);
    KernelTerms t;
    if (x.has_terms() && y.has_terms()) t = merge_terms(a, x.terms, b, y.terms);
    return Field(x.grid, a * x.values + b * y.values, std::move(t));
}

Field scaled(double a, const Field& x) {
    KernelTerms t = x.terms;
    for (auto& entry : t) entry.second *= a;
    return Field(x.grid, a * x.values, std::move(t));
}

}  // namespace simfilm
