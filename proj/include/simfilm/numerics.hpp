#pragma once

#include "simfilm/core.hpp"

#include <functional>

namespace simfilm {

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
struct GaussRule {
    Eigen::ArrayXd nodes;
    Eigen::ArrayXd weights;
};
GaussRule gauss_legendre(int n);

/// Composite Gauss-Legendre rule on [a, b] with `panels` equal panels of `order` points.
GaussRule composite_gauss(double a, double b, int panels, int order);

/// J_0(x), ..., J_kmax(x) for x >= 0, written to out[0..kmax].
void bessel_j_sequence(double x, int kmax, double* out);

/// Trapezoid-rule integral over a Uniform1D or Tensor2D grid (endpoints at half weight).
double integrate(const Field& f);

/// Trapezoid weights of `integrate` as an array over the grid points.
Eigen::ArrayXd trapezoid_weights(const GridSpec& grid);

/// Integral of the pointwise product of two fields on the same grid.
double inner(const Field& a, const Field& b);

/// Integral of f(y) * g(y1, y2) with g evaluated at the grid points.
double integrate_with(const Field& f, const std::function<double(double, double)>& g);

/// Discrete L2 norm over the grid (trapezoid weights).
double l2_norm(const Field& f);

/// Samples a callable on a grid.
Field sample(const GridSpec& grid, const std::function<double(double, double)>& fn);

/// Values on a uniform table r_i = i*h, i = 0..n-1, with 5-point Lagrange
/// interpolation and reflection through r = 0 with the given parity.
template <typename Scalar>
class RadialTable {
public:
    RadialTable() = default;
    RadialTable(double spacing, Eigen::Array<Scalar, Eigen::Dynamic, 1> values, int parity)
        : h_(spacing), v_(std::move(values)), parity_(parity) {}

    double spacing() const { return h_; }
    /// Largest |r| that can be interpolated without extrapolation.
    double extent() const { return h_ * static_cast<double>(v_.size() - 3); }
    const Eigen::Array<Scalar, Eigen::Dynamic, 1>& values() const { return v_; }

    Scalar operator()(double r) const {
        const Scalar v = apply(stencil(r));
        return r < 0 && parity_ < 0 ? -v : v;
    }

    struct Stencil {
        Eigen::Index base;
        std::array<double, 5> w;
    };

    Stencil stencil(double r) const {
        const double x = std::abs(r) / h_;
        const double i0 = std::round(x);
        if (i0 + 2 >= static_cast<double>(v_.size()))
            numerical_error("radial table evaluated beyond its extent");
        const double t = x - i0;
        const double tm2 = t + 2, tm1 = t + 1, tp1 = t - 1, tp2 = t - 2;
        Stencil s;
        s.base = static_cast<Eigen::Index>(i0);
        s.w = {tm1 * t * tp1 * tp2 / 24.0, -tm2 * t * tp1 * tp2 / 6.0, tm2 * tm1 * tp1 * tp2 / 4.0,
               -tm2 * tm1 * t * tp2 / 6.0, tm2 * tm1 * t * tp1 / 24.0};
        return s;
    }

    Scalar apply(const Stencil& s) const {
        Scalar acc = 0;
        for (int k = 0; k < 5; ++k) {
            const Eigen::Index j = s.base + k - 2;
            const Scalar v = j >= 0 ? v_[j] : static_cast<Scalar>(parity_) * v_[-j];
            acc += static_cast<Scalar>(s.w[static_cast<std::size_t>(k)]) * v;
        }
        return acc;
    }

private:
    double h_ = 1.0;
    Eigen::Array<Scalar, Eigen::Dynamic, 1> v_;
    int parity_ = 1;
};

/// Least-squares line fit y = a + b x; returns {a, b}.
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace simfilm
