#pragma once

#include <functional>
#include <stdexcept>

#include "fembem/geometry.hpp"

namespace fembem {

struct Mat2 {
    // row-major 2x2
    double a11 = 0, a12 = 0, a21 = 0, a22 = 0;

    Vec2 apply(const Vec2& y) const {
        return {a11 * y.x + a12 * y.y, a21 * y.x + a22 * y.y};
    }
};

/// Coefficient map A : R^2 -> R^2 with Lipschitz constant c_lip and strong
/// monotonicity constant c_ell.
struct CoefficientModel {
    std::function<Vec2(const Vec2&)> apply;
    std::function<Mat2(const Vec2&)> jacobian;
    double c_lip = 1.0;
    double c_ell = 1.0;
};

/// Central finite-difference Jacobian, used as fallback for user models.
inline Mat2 fd_jacobian(const std::function<Vec2(const Vec2&)>& f, const Vec2& y) {
    const double h = 1e-5 * std::max(1.0, norm(y));
    Vec2 dx = (f({y.x + h, y.y}) - f({y.x - h, y.y})) / (2 * h);
    Vec2 dy = (f({y.x, y.y + h}) - f({y.x, y.y - h})) / (2 * h);
    return {dx.x, dy.x, dx.y, dy.y};
}

inline CoefficientModel make_identity() {
    CoefficientModel m;
    m.apply = [](const Vec2& y) { return y; };
    m.jacobian = [](const Vec2&) { return Mat2{1, 0, 0, 1}; };
    m.c_lip = 1.0;
    m.c_ell = 1.0;
    return m;
}

/// A(y1,y2) = (c*y1, y2).
inline CoefficientModel make_anisotropic(double c) {
    if (c <= 0.0) throw std::invalid_argument("make_anisotropic: c must be positive");
    CoefficientModel m;
    m.apply = [c](const Vec2& y) { return Vec2{c * y.x, y.y}; };
    m.jacobian = [c](const Vec2&) { return Mat2{c, 0, 0, 1}; };
    m.c_ell = std::min(c, 1.0);
    m.c_lip = std::max(c, 1.0);
    return m;
}

/// A(y) = g(|y|) y with g(t) = 2 + 1/(1+t). Monotonicity constant 2; the
/// Lipschitz constant is the supremum of the Jacobian spectral norm, which
/// for this g equals g(0) = 3 (attained at y = 0).
inline CoefficientModel make_benchmark_nonlinear() {
    CoefficientModel m;
    auto g = [](double t) { return 2.0 + 1.0 / (1.0 + t); };
    auto dg = [](double t) { double s = 1.0 + t; return -1.0 / (s * s); };
    m.apply = [g](const Vec2& y) { return g(norm(y)) * y; };
    m.jacobian = [g, dg](const Vec2& y) -> Mat2 {
        double t = norm(y);
        if (t < 1e-300) return Mat2{g(0), 0, 0, g(0)};
        double gv = g(t), s = dg(t) / t;
        return {gv + s * y.x * y.x, s * y.x * y.y,
                s * y.x * y.y, gv + s * y.y * y.y};
    };
    m.c_ell = 2.0;
    m.c_lip = 3.0;
    return m;
}

} // namespace fembem
