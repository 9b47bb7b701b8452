#pragma once

#include <functional>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "fembem/mesh.hpp"
#include "fembem/nonlinearity.hpp"
#include "fembem/quadrature.hpp"

namespace fembem {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct VolumeData {
    std::function<double(const Vec2&)> f;                   // volume source
    std::function<double(const Vec2&, const Vec2&)> phi0;   // flux jump datum on Gamma (point, outward normal)
};

/// Gradients of the three nodal basis functions on triangle t (constant).
inline std::array<Vec2, 3> p1_gradients(const Mesh& m, int t) {
    const Triangle& T = m.triangles[t];
    const Vec2 p0 = m.vertices[T.v[0]], p1 = m.vertices[T.v[1]], p2 = m.vertices[T.v[2]];
    const double inv2A = 1.0 / (2.0 * signed_area(p0, p1, p2));
    auto rot = [](const Vec2& v) { return Vec2{-v.y, v.x}; };
    return {rot(p2 - p1) * inv2A, rot(p0 - p2) * inv2A, rot(p1 - p0) * inv2A};
}

/// Gradient of the P1 function with nodal values U on triangle t.
inline Vec2 p1_gradient_of(const Mesh& m, int t, const Vector& U) {
    const Triangle& T = m.triangles[t];
    auto g = p1_gradients(m, t);
    Vec2 out{0, 0};
    for (int i = 0; i < 3; ++i) out += U[T.v[i]] * g[i];
    return out;
}

/// Value of the P1 function at x inside triangle t.
inline double p1_value_at(const Mesh& m, int t, const Vector& U, const Vec2& x) {
    const Triangle& T = m.triangles[t];
    const Vec2 p0 = m.vertices[T.v[0]], p1 = m.vertices[T.v[1]], p2 = m.vertices[T.v[2]];
    const double A = signed_area(p0, p1, p2);
    const double l0 = signed_area(x, p1, p2) / A;
    const double l1 = signed_area(p0, x, p2) / A;
    return l0 * U[T.v[0]] + l1 * U[T.v[1]] + (1.0 - l0 - l1) * U[T.v[2]];
}

/// Entries <A grad U, grad eta_i> for all nodal basis functions. Exact for
/// P1: grad U is constant per triangle, so A is evaluated once per element.
inline Vector apply_nonlinear_form(const Mesh& m, const CoefficientModel& model, const Vector& U) {
    Vector out = Vector::Zero(m.vertices.size());
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        const Triangle& T = m.triangles[t];
        const double A = m.area(static_cast<int>(t));
        const Vec2 flux = model.apply(p1_gradient_of(m, static_cast<int>(t), U));
        auto g = p1_gradients(m, static_cast<int>(t));
        for (int i = 0; i < 3; ++i) out[T.v[i]] += A * dot(flux, g[i]);
    }
    return out;
}

/// Stiffness matrix of the linearization: entries <J_A(grad U) grad eta_j, grad eta_i>.
inline SparseMatrix assemble_linearized_stiffness(const Mesh& m, const CoefficientModel& model,
                                                  const Vector& U) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(m.triangles.size() * 9);
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        const Triangle& T = m.triangles[t];
        const double A = m.area(static_cast<int>(t));
        const Mat2 J = model.jacobian(p1_gradient_of(m, static_cast<int>(t), U));
        auto g = p1_gradients(m, static_cast<int>(t));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trip.emplace_back(T.v[i], T.v[j], A * dot(g[i], J.apply(g[j])));
    }
    SparseMatrix S(m.vertices.size(), m.vertices.size());
    S.setFromTriplets(trip.begin(), trip.end());
    return S;
}

/// Load vector: int_Omega f eta_i (7-point rule) + int_Gamma phi0 eta_i
/// (4-point Gauss per boundary edge).
inline Vector assemble_load(const Mesh& m, const VolumeData& data) {
    Vector out = Vector::Zero(m.vertices.size());
    if (data.f) {
        for (std::size_t t = 0; t < m.triangles.size(); ++t) {
            const Triangle& T = m.triangles[t];
            const Vec2 p0 = m.vertices[T.v[0]], p1 = m.vertices[T.v[1]], p2 = m.vertices[T.v[2]];
            const double A = m.area(static_cast<int>(t));
            for (const TriQuadPoint& q : tri_quad_order5()) {
                const Vec2 x{q.l1 * p0.x + q.l2 * p1.x + q.l3 * p2.x,
                             q.l1 * p0.y + q.l2 * p1.y + q.l3 * p2.y};
                const double fw = A * q.w * data.f(x);
                out[T.v[0]] += fw * q.l1;
                out[T.v[1]] += fw * q.l2;
                out[T.v[2]] += fw * q.l3;
            }
        }
    }
    if (data.phi0) {
        for (const BoundaryEdge& e : m.boundary_edges) {
            const Vec2 a = m.vertices[e.a], b = m.vertices[e.b];
            const double len = norm(b - a);
            for (const QuadPoint1D& q : gauss_legendre(4)) {
                const Vec2 x = a + q.x * (b - a);
                const double fw = len * q.w * data.phi0(x, e.nu);
                out[e.a] += fw * (1.0 - q.x);
                out[e.b] += fw * q.x;
            }
        }
    }
    return out;
}

namespace detail {
/// Evaluate a gradient with the corner-singularity guard: non-finite values
/// are retried after a tiny shift toward the triangle centroid.
inline Vec2 guarded_grad(const std::function<Vec2(const Vec2&)>& grad, const Vec2& x,
                         const Vec2& centroid, double h) {
    Vec2 g = grad(x);
    if (std::isfinite(g.x) && std::isfinite(g.y)) return g;
    Vec2 shifted = x + 1e-12 * h * (centroid - x);
    return grad(shifted);
}
} // namespace detail

/// || grad u - grad U ||_{L^2(Omega)} with the order-5 rule per triangle.
inline double h1_seminorm_error(const Mesh& m, const Vector& U,
                                const std::function<Vec2(const Vec2&)>& grad_exact) {
    double s = 0.0;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        const Triangle& T = m.triangles[t];
        const Vec2 p0 = m.vertices[T.v[0]], p1 = m.vertices[T.v[1]], p2 = m.vertices[T.v[2]];
        const Vec2 centroid = (p0 + p1 + p2) / 3.0;
        const double A = m.area(static_cast<int>(t));
        const double h = std::sqrt(A);
        const Vec2 gU = p1_gradient_of(m, static_cast<int>(t), U);
        for (const TriQuadPoint& q : tri_quad_order5()) {
            const Vec2 x{q.l1 * p0.x + q.l2 * p1.x + q.l3 * p2.x,
                         q.l1 * p0.y + q.l2 * p1.y + q.l3 * p2.y};
            const Vec2 diff = detail::guarded_grad(grad_exact, x, centroid, h) - gU;
            s += A * q.w * norm2(diff);
        }
    }
    return std::sqrt(s);
}

/// || u - U ||_{L^2(Omega)} with the order-5 rule per triangle.
inline double l2_error(const Mesh& m, const Vector& U,
                       const std::function<double(const Vec2&)>& exact) {
    double s = 0.0;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        const Triangle& T = m.triangles[t];
        const Vec2 p0 = m.vertices[T.v[0]], p1 = m.vertices[T.v[1]], p2 = m.vertices[T.v[2]];
        const double A = m.area(static_cast<int>(t));
        for (const TriQuadPoint& q : tri_quad_order5()) {
            const Vec2 x{q.l1 * p0.x + q.l2 * p1.x + q.l3 * p2.x,
                         q.l1 * p0.y + q.l2 * p1.y + q.l3 * p2.y};
            const double uh = q.l1 * U[T.v[0]] + q.l2 * U[T.v[1]] + q.l3 * U[T.v[2]];
            const double d = exact(x) - uh;
            s += A * q.w * d * d;
        }
    }
    return std::sqrt(s);
}

/// int_Omega U^2, exact for P1 (element mass matrix A/12 [[2,1,1],[1,2,1],[1,1,2]]).
inline double p1_l2_norm_sq(const Mesh& m, const Vector& U) {
    double s = 0.0;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        const Triangle& T = m.triangles[t];
        const double A = m.area(static_cast<int>(t));
        const double u0 = U[T.v[0]], u1 = U[T.v[1]], u2 = U[T.v[2]];
        s += A / 6.0 * (u0 * u0 + u1 * u1 + u2 * u2 + u0 * u1 + u1 * u2 + u2 * u0);
    }
    return s;
}

/// int_Omega |grad U|^2, exact for P1.
inline double p1_h1_seminorm_sq(const Mesh& m, const Vector& U) {
    double s = 0.0;
    for (std::size_t t = 0; t < m.triangles.size(); ++t)
        s += m.area(static_cast<int>(t)) * norm2(p1_gradient_of(m, static_cast<int>(t), U));
    return s;
}

/// Full H^1(Omega) error.
inline double h1_error(const Mesh& m, const Vector& U,
                       const std::function<double(const Vec2&)>& exact,
                       const std::function<Vec2(const Vec2&)>& grad_exact) {
    const double semi = h1_seminorm_error(m, U, grad_exact);
    const double l2 = l2_error(m, U, exact);
    return std::sqrt(semi * semi + l2 * l2);
}

} // namespace fembem
