#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "fembem/geometry.hpp"

namespace fembem {

struct QuadPoint1D {
    double x; // in [0,1]
    double w;
};

namespace detail {
inline std::vector<QuadPoint1D> compute_gauss_legendre(int n);
}

/// Gauss-Legendre rule on [0,1] (cached per order).
inline const std::vector<QuadPoint1D>& gauss_legendre(int n) {
    thread_local std::vector<std::vector<QuadPoint1D>> cache;
    if (static_cast<int>(cache.size()) <= n) cache.resize(n + 1);
    if (cache[n].empty()) cache[n] = detail::compute_gauss_legendre(n);
    return cache[n];
}

namespace detail {
inline std::vector<QuadPoint1D> compute_gauss_legendre(int n) {
    std::vector<QuadPoint1D> pts(n);
    for (int i = 0; i < n; ++i) {
        // initial guess on [-1,1]
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        pts[n - 1 - i] = {0.5 * (x + 1.0), 0.5 * w};
    }
    return pts;
}
} // namespace detail

struct TriQuadPoint {
    double l1, l2, l3; // barycentric coordinates
    double w;          // weight, sums to 1
};

/// 7-point order-5 rule on the reference triangle (weights sum to 1).
inline const std::array<TriQuadPoint, 7>& tri_quad_order5() {
    static const double a = (6.0 + std::sqrt(15.0)) / 21.0;
    static const double b = (6.0 - std::sqrt(15.0)) / 21.0;
    static const double wa = (155.0 + std::sqrt(15.0)) / 1200.0;
    static const double wb = (155.0 - std::sqrt(15.0)) / 1200.0;
    static const std::array<TriQuadPoint, 7> rule = {{
        {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0},
        {a, a, 1 - 2 * a, wa},
        {a, 1 - 2 * a, a, wa},
        {1 - 2 * a, a, a, wa},
        {b, b, 1 - 2 * b, wb},
        {b, 1 - 2 * b, b, wb},
        {1 - 2 * b, b, b, wb},
    }};
    return rule;
}

/// Integrate f over the triangle (p0,p1,p2) with the 7-point rule.
template <class F>
double integrate_triangle(const Vec2& p0, const Vec2& p1, const Vec2& p2, F&& f) {
    const double A = std::abs(signed_area(p0, p1, p2));
    double s = 0.0;
    for (const TriQuadPoint& q : tri_quad_order5())
        s += q.w * f(Vec2{q.l1 * p0.x + q.l2 * p1.x + q.l3 * p2.x,
                          q.l1 * p0.y + q.l2 * p1.y + q.l3 * p2.y});
    return A * s;
}

/// Integrate f over the segment [a,b] with an n-point Gauss rule.
template <class F>
double integrate_segment(const Vec2& a, const Vec2& b, int n, F&& f) {
    const double len = norm(b - a);
    double s = 0.0;
    for (const QuadPoint1D& q : gauss_legendre(n))
        s += q.w * f(a + q.x * (b - a));
    return len * s;
}

} // namespace fembem
