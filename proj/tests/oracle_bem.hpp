// Independent graded-quadrature oracle for the boundary integral operator
// matrices, plus a random-polygon mesh builder. Used by the unit tests and
// the acceptance gate; deliberately avoids the closed-form panel primitives
// of the library and integrates the raw kernels numerically.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fembem/bem.hpp"
#include "fembem/mesh.hpp"

namespace oracle {

using fembem::Mesh;
using fembem::Vec2;

/// Gauss quadrature of f over [a, b] (points in R^2), order n.
template <class F>
double gauss_segment(const Vec2& a, const Vec2& b, int n, F&& f) {
    const double len = fembem::norm(b - a);
    // Deeply graded pieces can collapse to zero length in floating point;
    // they contribute nothing (and would otherwise produce 0 * inf).
    if (len == 0.0) return 0.0;
    double s = 0.0;
    for (const auto& q : fembem::gauss_legendre(n)) s += q.w * f(a + q.x * (b - a));
    return len * s;
}

/// Geometrically graded quadrature toward `toward` (must be a or b).
template <class F>
double graded_segment(const Vec2& a, const Vec2& b, const Vec2& toward, int levels, int order,
                      F&& f) {
    const bool toward_a = fembem::norm(toward - a) < fembem::norm(toward - b);
    const Vec2 s = toward_a ? a : b; // singular end
    const Vec2 o = toward_a ? b : a;
    double sum = 0.0;
    Vec2 far = o;
    for (int k = 0; k < levels; ++k) {
        const Vec2 near = s + 0.5 * (far - s);
        sum += gauss_segment(near, far, order, f);
        far = near;
    }
    sum += gauss_segment(s, far, order, f);
    return sum;
}

/// 1D graded quadrature of g over (0, L], geometrically graded toward 0.
/// Working in arclength coordinates avoids the cancellation that plagues
/// point subtraction near a shared panel vertex.
template <class G>
double graded_1d(double L, int levels, int order, G&& g) {
    double sum = 0.0;
    double hi = L;
    for (int k = 0; k < levels && hi > 0.0; ++k) {
        const double lo = 0.5 * hi;
        for (const auto& q : fembem::gauss_legendre(order))
            sum += (hi - lo) * q.w * g(lo + q.x * (hi - lo));
        hi = lo;
    }
    for (const auto& q : fembem::gauss_legendre(order)) sum += hi * q.w * g(hi * q.x);
    return sum;
}

inline double log_kernel(const Vec2& x, const Vec2& y) {
    return -std::log(fembem::norm(x - y)) / (2.0 * M_PI);
}

/// Double-layer kernel with the library's sign convention: integrating the
/// constant density 1 over a closed boundary gives -1 for interior points.
inline double dl_kernel(const Vec2& x, const Vec2& y, const Vec2& nu_y) {
    const Vec2 d = x - y;
    return fembem::dot(d, nu_y) / (2.0 * M_PI * fembem::norm2(d));
}

inline bool share_vertex(const Vec2& a1, const Vec2& b1, const Vec2& a2, const Vec2& b2,
                         Vec2& shared) {
    const double tol = 1e-14;
    for (const Vec2& p : {a1, b1})
        for (const Vec2& q : {a2, b2})
            if (fembem::norm(p - q) < tol) {
                shared = p;
                return true;
            }
    return false;
}

/// <chi_j, V chi_k> by raw-kernel quadrature.
inline double v_entry(const Mesh& m, int j, int k) {
    const Vec2 aj = m.vertices[m.boundary_edges[j].a], bj = m.vertices[m.boundary_edges[j].b];
    const Vec2 ak = m.vertices[m.boundary_edges[k].a], bk = m.vertices[m.boundary_edges[k].b];
    if (j == k) {
        // Reduce the symmetric double integral: I = 2 int_0^L (L-w) k(w) dw.
        const double L = fembem::norm(bj - aj);
        return 2.0 * graded_1d(L, 60, 16, [&](double w) {
            return (L - w) * (-std::log(w)) / (2.0 * M_PI);
        });
    }
    Vec2 shared;
    if (share_vertex(aj, bj, ak, bk, shared)) {
        // Arclength coordinates from the shared vertex:
        // |x - y|^2 = s^2 + t^2 - 2 s t cos(angle), strictly positive.
        const Vec2 oj = fembem::norm(aj - shared) > fembem::norm(bj - shared) ? aj : bj;
        const Vec2 ok = fembem::norm(ak - shared) > fembem::norm(bk - shared) ? ak : bk;
        const double Lj = fembem::norm(oj - shared), Lk = fembem::norm(ok - shared);
        const double c = fembem::dot(oj - shared, ok - shared) / (Lj * Lk);
        return graded_1d(Lj, 48, 12, [&](double s) {
            return graded_1d(Lk, 48, 12, [&](double t) {
                const double r2 = s * s + t * t - 2.0 * s * t * c;
                return -0.5 * std::log(r2) / (2.0 * M_PI);
            });
        });
    }
    auto outer = [&](const Vec2& x) {
        return gauss_segment(ak, bk, 32, [&](const Vec2& y) { return log_kernel(x, y); });
    };
    return gauss_segment(aj, bj, 32, outer);
}

/// <chi_j, K eta> where eta is the P1 hat of boundary node with mesh vertex
/// index `vk`. The kernel vanishes identically for panels collinear with the
/// observation panel, including the j-th panel itself.
inline double k_entry(const Mesh& m, int j, int vk) {
    const Vec2 aj = m.vertices[m.boundary_edges[j].a], bj = m.vertices[m.boundary_edges[j].b];
    double total = 0.0;
    for (std::size_t p = 0; p < m.boundary_edges.size(); ++p) {
        const auto& e = m.boundary_edges[p];
        if (e.a != vk && e.b != vk) continue;
        const Vec2 ap = m.vertices[e.a], bp = m.vertices[e.b];
        const double L = fembem::norm(bp - ap);
        const Vec2 dir = (bp - ap) / L;
        auto hat = [&](const Vec2& y) {
            const double t = fembem::dot(y - ap, dir) / L;
            return e.a == vk ? 1.0 - t : t;
        };
        // Collinearity (and p == j) makes the kernel exactly zero.
        const Vec2 nu = e.nu;
        const double scale = std::max(L, fembem::norm(bj - aj));
        if (std::abs(fembem::dot(aj - ap, nu)) < 1e-13 * scale &&
            std::abs(fembem::dot(bj - ap, nu)) < 1e-13 * scale)
            continue;
        Vec2 shared;
        if (share_vertex(aj, bj, ap, bp, shared)) {
            // Arclength coordinates from the shared vertex. With x on panel j
            // and y on panel p, (x - y) . nu_p = s (d_j . nu_p) because the
            // source panel's own direction is orthogonal to nu_p.
            const Vec2 oj = fembem::norm(aj - shared) > fembem::norm(bj - shared) ? aj : bj;
            const Vec2 op = fembem::norm(ap - shared) > fembem::norm(bp - shared) ? ap : bp;
            const double Lj = fembem::norm(oj - shared), Lp2 = fembem::norm(op - shared);
            const Vec2 dj = (1.0 / Lj) * (oj - shared);
            const double c = fembem::dot(dj, op - shared) / Lp2;
            const double djnu = fembem::dot(dj, nu);
            const bool vk_at_shared = fembem::norm(m.vertices[vk] - shared) < 1e-14;
            total += graded_1d(Lj, 48, 12, [&](double s) {
                return graded_1d(Lp2, 48, 12, [&](double t) {
                    const double r2 = s * s + t * t - 2.0 * s * t * c;
                    const double h = vk_at_shared ? 1.0 - t / Lp2 : t / Lp2;
                    return h * s * djnu / (2.0 * M_PI * r2);
                });
            });
        } else {
            auto outer = [&](const Vec2& x) {
                return gauss_segment(ap, bp, 32,
                                     [&](const Vec2& y) { return hat(y) * dl_kernel(x, y, nu); });
            };
            total += gauss_segment(aj, bj, 32, outer);
        }
    }
    return total;
}

struct OracleSet {
    Eigen::MatrixXd V, K, W;
};

/// Full oracle matrices in the library's index conventions (rows = boundary
/// edges; K/W columns = boundary nodes in fembem::OperatorSet::bnodes order).
inline OracleSet assemble(const Mesh& m, const fembem::OperatorSet& ops) {
    const int nE = static_cast<int>(m.boundary_edges.size());
    const int nB = static_cast<int>(ops.bnodes.size());
    OracleSet o;
    o.V.resize(nE, nE);
    for (int j = 0; j < nE; ++j)
        for (int k = j; k < nE; ++k) o.V(j, k) = o.V(k, j) = v_entry(m, j, k);
    o.K.resize(nE, nB);
    for (int j = 0; j < nE; ++j)
        for (int k = 0; k < nB; ++k) o.K(j, k) = k_entry(m, j, ops.bnodes[k]);
    // W via the arclength-derivative identity on the oracle V.
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(nE, nB);
    for (int e = 0; e < nE; ++e) {
        const auto& be = m.boundary_edges[e];
        const double L = m.boundary_edge_length(e);
        G(e, ops.local_index.at(be.a)) = -1.0 / L;
        G(e, ops.local_index.at(be.b)) = 1.0 / L;
    }
    o.W = G.transpose() * o.V * G;
    return o;
}

/// Random star-shaped 10-panel polygon around the origin, fan-triangulated;
/// diameter well below 1.
inline Mesh random_polygon(std::mt19937& rng, int sides = 10) {
    std::uniform_real_distribution<double> ur(0.0, 1.0);
    std::vector<double> ang(sides);
    for (int i = 0; i < sides; ++i) ang[i] = 2.0 * M_PI * (i + 0.15 + 0.7 * ur(rng)) / sides;
    Mesh m;
    m.domain = fembem::Domain::LShape; // irrelevant tag
    m.vertices.push_back({0.0, 0.0});
    for (int i = 0; i < sides; ++i) {
        const double r = 0.1 + 0.1 * ur(rng);
        m.vertices.push_back({r * std::cos(ang[i]), r * std::sin(ang[i])});
    }
    for (int i = 0; i < sides; ++i)
        m.triangles.push_back({{0, 1 + i, 1 + (i + 1) % sides}, 0, 0});
    m.vertex_parents.resize(m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        m.vertex_parents[i] = {static_cast<int>(i), static_cast<int>(i)};
    fembem::detail::init_ref_edges_longest(m);
    fembem::detail::build_edges(m);
    fembem::check_mesh(m);
    return m;
}

} // namespace oracle
