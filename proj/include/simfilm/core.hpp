#pragma once

#include <Eigen/Dense>

#include <array>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace simfilm {

enum class ErrorKind { Config, Numerical, Invariant };

/// Failure raised by any module; the kind selects the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void config_error(const std::string& msg) { throw Error(ErrorKind::Config, msg); }
[[noreturn]] inline void numerical_error(const std::string& msg) { throw Error(ErrorKind::Numerical, msg); }
[[noreturn]] inline void invariant_error(const std::string& msg) { throw Error(ErrorKind::Invariant, msg); }

/// Multi-index over N in {1,2}.
struct MultiIndex {
    std::array<int, 2> c{0, 0};
    int dim = 1;

    MultiIndex() = default;
    MultiIndex(std::initializer_list<int> parts);
    static MultiIndex zero(int dim);

    int operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
    int order() const { return c[0] + (dim > 1 ? c[1] : 0); }
    std::int64_t factorial() const;
    std::string str() const;

    auto operator<=>(const MultiIndex&) const = default;
};

/// Graded order: by |beta|, then descending in the first component.
bool graded_lex_less(const MultiIndex& a, const MultiIndex& b);

/// All multi-indices with |beta| == k, in graded-lex order.
std::vector<MultiIndex> multi_indices(int dim, int k);
/// All multi-indices with |beta| <= K, in graded-lex order.
std::vector<MultiIndex> multi_indices_upto(int dim, int K);

/// Exact rational with 64-bit parts, always reduced with positive denominator.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n, std::int64_t d = 1);

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;

    friend Rational operator+(Rational a, Rational b);
    friend Rational operator-(Rational a, Rational b);
    friend Rational operator*(Rational a, Rational b);
    friend Rational operator/(Rational a, Rational b);
    Rational operator-() const { return Rational(-num, den); }
    Rational& operator+=(Rational o) { return *this = *this + o; }
    Rational& operator*=(Rational o) { return *this = *this * o; }
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    bool is_zero() const { return num == 0; }
};

enum class GridKind { Uniform1D, Radial, Tensor2D };

std::string to_string(GridKind kind);

/// Uniform grid description. Uniform1D and Tensor2D cover [-L, L] per axis,
/// Radial covers [0, L]; endpoints included.
struct GridSpec {
    GridKind kind = GridKind::Uniform1D;
    double half_width = 0.0;
    double spacing = 0.0;

    static GridSpec uniform(double L, Eigen::Index cells);
    static GridSpec tensor(double L, Eigen::Index cells);
    static GridSpec radial(double L, Eigen::Index cells);

    int dim() const { return kind == GridKind::Tensor2D ? 2 : 1; }
    Eigen::Index cells() const;
    Eigen::Index axis_count() const { return cells() + 1; }
    Eigen::Index size() const;
    double axis(Eigen::Index i) const;
    /// Coordinates of flat point index p (y2 = 0 for one-dimensional grids).
    std::array<double, 2> point(Eigen::Index p) const;
    bool operator==(const GridSpec& o) const;
};

/// Linear combination of kernel derivatives, sum_k coef_k D^{beta_k} F.
using KernelTerms = std::vector<std::pair<MultiIndex, double>>;

/// Samples of a scalar function on a grid. Tensor grids are stored row-major
/// with the y1 index outermost. `terms` records the kernel representation when
/// the field was produced from kernel derivatives.
template <typename Scalar>
struct SampledField {
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    GridSpec grid;
    Array values;
    KernelTerms terms;

    SampledField() = default;
    SampledField(const GridSpec& g, Array v, KernelTerms t = {})
        : grid(g), values(std::move(v)), terms(std::move(t)) {
        if (values.size() != grid.size())
            config_error("field value count does not match grid extent");
    }

    int dim() const { return grid.dim(); }
    Eigen::Index size() const { return values.size(); }
    bool has_terms() const { return !terms.empty(); }
    bool all_finite() const { return values.allFinite(); }

    Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> as_grid() const {
        const Eigen::Index n = grid.axis_count();
        return {values.data(), grid.kind == GridKind::Tensor2D ? n : values.size(),
                grid.kind == GridKind::Tensor2D ? n : 1};
    }
};

using Field = SampledField<double>;

/// a*x + b*y on identical grids; kernel terms are combined when both carry them.
Field combine(double a, const Field& x, double b, const Field& y);
Field scaled(double a, const Field& x);
void require_same_grid(const Field& a, const Field& b);

}  // namespace simfilm
