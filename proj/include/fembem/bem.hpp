#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

#include "fembem/fem.hpp"
#include "fembem/mesh.hpp"
#include "fembem/quadrature.hpp"

namespace fembem {

/// Galerkin matrices of the 2D Laplace layer operators on the boundary mesh.
/// Rows/columns over P0 densities are indexed by boundary edge; columns/rows
/// over P1 traces are indexed by boundary vertex in ascending global order
/// (bnodes / local_index give the two-way map).
struct OperatorSet {
    std::vector<int> bnodes;      // boundary vertex global ids, ascending
    std::vector<int> local_index; // global vertex id -> boundary-local id, -1 if interior
    Eigen::MatrixXd V;            // nE x nE,  <chi_j, V chi_k>
    Eigen::MatrixXd K;            // nE x nVb, <chi_j, K eta_k>
    Eigen::MatrixXd M;            // nE x nVb, <chi_j, eta_k>
    Eigen::MatrixXd W;            // nVb x nVb, <W eta_j, eta_k>
};

namespace bemdetail {

struct PanelFrame {
    Vec2 a, b, tau, nu;
    double L = 0.0;
};

inline PanelFrame panel_frame(const Mesh& m, const BoundaryEdge& e) {
    PanelFrame f;
    f.a = m.vertices[e.a];
    f.b = m.vertices[e.b];
    Vec2 d = f.b - f.a;
    f.L = norm(d);
    if (f.L <= 0.0) throw std::runtime_error("bem: degenerate panel");
    f.tau = d / f.L;
    f.nu = e.nu;
    return f;
}

struct Local {
    double p, q, u1, u2;
};

inline Local local_coords(const PanelFrame& f, const Vec2& x) {
    Local c;
    Vec2 r = x - f.a;
    c.p = dot(r, f.tau);
    c.q = dot(r, f.nu);
    c.u1 = -c.p;
    c.u2 = f.L - c.p;
    return c;
}

/// Signed angle subtended by the panel, atan(u2/q) - atan(u1/q); the
/// principal-value convention sets it to 0 on the panel line (q = 0).
inline double theta_of(const Local& c) {
    if (c.q == 0.0) return 0.0;
    return std::atan(c.u2 / c.q) - std::atan(c.u1 / c.q);
}

inline double ln_ratio(const Local& c) {
    return std::log((c.u2 * c.u2 + c.q * c.q) / (c.u1 * c.u1 + c.q * c.q));
}

inline double q_atan(double u, double q) { return q == 0.0 ? 0.0 : q * std::atan(u / q); }

/// Primitive of the single-layer antiderivative: Q(u) = u/2 log(u^2+q^2) - u + q atan(u/q).
inline double slp_primitive(double u, double q) {
    double r2 = u * u + q * q;
    double t = r2 == 0.0 ? 0.0 : 0.5 * u * std::log(r2);
    return t - u + q_atan(u, q);
}

/// Single-layer potential of the unit density on the panel: -(1/2pi) int log|x-y| ds_y.
inline double slp_value(const PanelFrame& f, const Vec2& x) {
    Local c = local_coords(f, x);
    return -(slp_primitive(c.u2, c.q) - slp_primitive(c.u1, c.q)) / (2.0 * M_PI);
}

/// Gradient of slp_value; on the panel line only the tangential part is
/// meaningful (principal value), the normal part carries the PV convention.
inline Vec2 slp_gradient(const PanelFrame& f, const Vec2& x) {
    Local c = local_coords(f, x);
    double dp = ln_ratio(c) / (4.0 * M_PI);
    double dq = -theta_of(c) / (2.0 * M_PI);
    return dp * f.tau + dq * f.nu;
}

/// Double-layer potential of the linear density (ea at a, eb at b):
/// int (x-y).nu(y) / (2pi |x-y|^2) eta(y) ds_y.
inline double dlp_value(const PanelFrame& f, const Vec2& x, double ea, double eb) {
    Local c = local_coords(f, x);
    double mgrad = (eb - ea) / f.L;
    return ((ea + mgrad * c.p) * theta_of(c) + 0.5 * mgrad * c.q * ln_ratio(c)) / (2.0 * M_PI);
}

/// Gradient of dlp_value (same PV convention on the panel line).
inline Vec2 dlp_gradient(const PanelFrame& f, const Vec2& x, double ea, double eb) {
    Local c = local_coords(f, x);
    double m = (eb - ea) / f.L;
    double d1 = c.u1 * c.u1 + c.q * c.q;
    double d2 = c.u2 * c.u2 + c.q * c.q;
    double th = theta_of(c);
    double lr = ln_ratio(c);
    double dth_dp = -c.q / d2 + c.q / d1;
    double dth_dq = -c.u2 / d2 + c.u1 / d1;
    double dlr_dp = -2.0 * c.u2 / d2 + 2.0 * c.u1 / d1;
    double dlr_dq = 2.0 * c.q / d2 - 2.0 * c.q / d1;
    double val = ea + m * c.p;
    double dp = (m * th + val * dth_dp + 0.5 * m * c.q * dlr_dp) / (2.0 * M_PI);
    double dq = (val * dth_dq + 0.5 * m * lr + 0.5 * m * c.q * dlr_dq) / (2.0 * M_PI);
    return dp * f.tau + dq * f.nu;
}

/// Composite quadrature on [a,b] geometrically graded toward one endpoint.
template <class F>
double integrate_graded(const Vec2& a, const Vec2& b, bool toward_a, int levels, int order, F&& f) {
    const Vec2 lo = toward_a ? a : b;
    const Vec2 hi = toward_a ? b : a;
    double s = 0.0;
    double t1 = 1.0;
    for (int lev = 0; lev < levels; ++lev) {
        double t0 = (lev + 1 == levels) ? 0.0 : 0.5 * t1;
        s += integrate_segment(lo + t0 * (hi - lo), lo + t1 * (hi - lo), order, f);
        t1 = t0;
    }
    return s;
}

inline double point_segment_distance(const Vec2& x, const Vec2& a, const Vec2& b) {
    Vec2 d = b - a;
    double s = std::clamp(dot(x - a, d) / norm2(d), 0.0, 1.0);
    return norm(x - (a + s * d));
}

inline double segment_distance(const PanelFrame& f, const PanelFrame& g) {
    double d = point_segment_distance(f.a, g.a, g.b);
    d = std::min(d, point_segment_distance(f.b, g.a, g.b));
    d = std::min(d, point_segment_distance(g.a, f.a, f.b));
    d = std::min(d, point_segment_distance(g.b, f.a, f.b));
    return d;
}

/// Outer Galerkin quadrature over panel j of a potential generated by panel
/// k (closed form, so only the outer integral is numeric). Chooses between
/// plain Gauss and endpoint-graded composite rules based on panel proximity.
template <class F>
double outer_integral(const PanelFrame& fj, const BoundaryEdge& ej, const BoundaryEdge& ek,
                      const PanelFrame& fk, F&& f) {
    const bool share_a = (ej.a == ek.a || ej.a == ek.b);
    const bool share_b = (ej.b == ek.a || ej.b == ek.b);
    if (share_a || share_b)
        return integrate_graded(fj.a, fj.b, share_a, 36, 10, f);
    const double d = segment_distance(fj, fk);
    const double r = d / fj.L;
    if (r < 0.4) {
        bool toward_a = point_segment_distance(fj.a, fk.a, fk.b) <
                        point_segment_distance(fj.b, fk.a, fk.b);
        int levels = std::clamp(static_cast<int>(std::ceil(std::log2(1.0 / std::max(r, 1e-12)))) + 10,
                                12, 48);
        return integrate_graded(fj.a, fj.b, toward_a, levels, 10, f);
    }
    const double rho = 1.0 + 2.0 * r + 2.0 * std::sqrt(r * (1.0 + r));
    int n = std::clamp(static_cast<int>(std::ceil(16.0 / std::log(rho))), 6, 32);
    return integrate_segment(fj.a, fj.b, n, f);
}

inline bool collinear_with(const PanelFrame& fk, const Vec2& xa, const Vec2& xb, double scale) {
    return std::abs(dot(xa - fk.a, fk.nu)) <= 1e-13 * scale &&
           std::abs(dot(xb - fk.a, fk.nu)) <= 1e-13 * scale;
}

inline void check_not_endpoint(const Mesh& m, const Vec2& x) {
    for (const BoundaryEdge& e : m.boundary_edges) {
        if (norm(x - m.vertices[e.a]) < 1e-14 || norm(x - m.vertices[e.b]) < 1e-14)
            throw std::runtime_error("bem: evaluation point coincides with a panel endpoint");
    }
}

} // namespace bemdetail

inline OperatorSet assemble_operators(const Mesh& m) {
    using namespace bemdetail;
    // Ellipticity of V requires diam(Omega) < 1.
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const Vec2& v : m.vertices) {
        xmin = std::min(xmin, v.x); xmax = std::max(xmax, v.x);
        ymin = std::min(ymin, v.y); ymax = std::max(ymax, v.y);
    }
    if (std::hypot(xmax - xmin, ymax - ymin) >= 1.0)
        throw std::invalid_argument("assemble_operators: domain diameter must be < 1");

    const int nE = static_cast<int>(m.boundary_edges.size());
    OperatorSet ops;
    ops.bnodes = m.boundary_vertices();
    ops.local_index.assign(m.vertices.size(), -1);
    for (std::size_t i = 0; i < ops.bnodes.size(); ++i)
        ops.local_index[ops.bnodes[i]] = static_cast<int>(i);
    const int nB = static_cast<int>(ops.bnodes.size());

    std::vector<PanelFrame> frames(nE);
    for (int e = 0; e < nE; ++e) frames[e] = panel_frame(m, m.boundary_edges[e]);

    ops.V = Eigen::MatrixXd::Zero(nE, nE);
    ops.K = Eigen::MatrixXd::Zero(nE, nB);
    ops.M = Eigen::MatrixXd::Zero(nE, nB);

    for (int j = 0; j < nE; ++j) {
        const PanelFrame& fj = frames[j];
        ops.M(j, ops.local_index[m.boundary_edges[j].a]) += 0.5 * fj.L;
        ops.M(j, ops.local_index[m.boundary_edges[j].b]) += 0.5 * fj.L;
        for (int k = 0; k < nE; ++k) {
            const PanelFrame& fk = frames[k];
            if (j == k) {
                // int_E int_E -log|s-t| ds dt = L^2 (3/2 - log L)
                ops.V(j, k) = fj.L * fj.L * (1.5 - std::log(fj.L)) / (2.0 * M_PI);
                continue; // same-panel K entry is an exact zero (q = 0)
            }
            ops.V(j, k) = outer_integral(fj, m.boundary_edges[j], m.boundary_edges[k], fk,
                                         [&](const Vec2& x) { return slp_value(fk, x); });
            if (!collinear_with(fk, fj.a, fj.b, std::max(fj.L, fk.L))) {
                const int ca = ops.local_index[m.boundary_edges[k].a];
                const int cb = ops.local_index[m.boundary_edges[k].b];
                ops.K(j, ca) += outer_integral(fj, m.boundary_edges[j], m.boundary_edges[k], fk,
                                               [&](const Vec2& x) { return dlp_value(fk, x, 1, 0); });
                ops.K(j, cb) += outer_integral(fj, m.boundary_edges[j], m.boundary_edges[k], fk,
                                               [&](const Vec2& x) { return dlp_value(fk, x, 0, 1); });
            }
        }
    }

    // W via <W u, v> = <V u', v'> with u' the P0 arclength derivative of the
    // P1 trace: exact for P1, no hypersingular integrals needed.
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(nE, nB);
    for (int e = 0; e < nE; ++e) {
        G(e, ops.local_index[m.boundary_edges[e].a]) = -1.0 / frames[e].L;
        G(e, ops.local_index[m.boundary_edges[e].b]) = 1.0 / frames[e].L;
    }
    ops.W = G.transpose() * ops.V * G;
    return ops;
}

/// Single-layer potential of the P0 density phi (one value per boundary edge) at x.
inline double eval_V(const Mesh& m, const Vector& phi, const Vec2& x) {
    bemdetail::check_not_endpoint(m, x);
    double s = 0.0;
    for (std::size_t k = 0; k < m.boundary_edges.size(); ++k)
        if (phi[k] != 0.0)
            s += phi[k] * bemdetail::slp_value(bemdetail::panel_frame(m, m.boundary_edges[k]), x);
    return s;
}

/// Tangential (arclength) derivative of V phi at x, a point strictly inside
/// boundary edge at_edge.
inline double eval_V_arcderiv(const Mesh& m, const Vector& phi, int at_edge, const Vec2& x) {
    bemdetail::check_not_endpoint(m, x);
    const bemdetail::PanelFrame fe = bemdetail::panel_frame(m, m.boundary_edges[at_edge]);
    Vec2 g{0, 0};
    for (std::size_t k = 0; k < m.boundary_edges.size(); ++k)
        if (phi[k] != 0.0)
            g += phi[k] * bemdetail::slp_gradient(bemdetail::panel_frame(m, m.boundary_edges[k]), x);
    return dot(g, fe.tau);
}

/// Double-layer potential (principal value) of the P1 trace with global nodal
/// values u, evaluated at boundary point x.
inline double eval_K(const Mesh& m, const Vector& u, const Vec2& x) {
    bemdetail::check_not_endpoint(m, x);
    double s = 0.0;
    for (const BoundaryEdge& e : m.boundary_edges)
        s += bemdetail::dlp_value(bemdetail::panel_frame(m, e), x, u[e.a], u[e.b]);
    return s;
}

/// Tangential derivative of K u at x inside boundary edge at_edge.
inline double eval_K_arcderiv(const Mesh& m, const Vector& u, int at_edge, const Vec2& x) {
    bemdetail::check_not_endpoint(m, x);
    const bemdetail::PanelFrame fe = bemdetail::panel_frame(m, m.boundary_edges[at_edge]);
    Vec2 g{0, 0};
    for (const BoundaryEdge& e : m.boundary_edges)
        g += bemdetail::dlp_gradient(bemdetail::panel_frame(m, e), x, u[e.a], u[e.b]);
    return dot(g, fe.tau);
}

/// Adjoint double-layer potential (principal value) of the P0 density phi at
/// x inside boundary edge at_edge: nu_x . grad (V phi)(x).
inline double eval_Kadj(const Mesh& m, const Vector& phi, int at_edge, const Vec2& x) {
    bemdetail::check_not_endpoint(m, x);
    const Vec2 nu_x = m.boundary_edges[at_edge].nu;
    Vec2 g{0, 0};
    for (std::size_t k = 0; k < m.boundary_edges.size(); ++k)
        if (phi[k] != 0.0)
            g += phi[k] * bemdetail::slp_gradient(bemdetail::panel_frame(m, m.boundary_edges[k]), x);
    return dot(g, nu_x);
}

/// Hypersingular operator applied to the P1 trace with nodal values u:
/// W u = -d/ds V(u'), with u' the P0 arclength derivative.
inline double eval_W(const Mesh& m, const Vector& u, int at_edge, const Vec2& x) {
    Vector du(m.boundary_edges.size());
    for (std::size_t e = 0; e < m.boundary_edges.size(); ++e) {
        const BoundaryEdge& be = m.boundary_edges[e];
        du[e] = (u[be.b] - u[be.a]) / m.boundary_edge_length(static_cast<int>(e));
    }
    return -eval_V_arcderiv(m, du, at_edge, x);
}

/// Binary matrix dump: 16-byte header (8-byte magic "FBMAT01\0", uint32 rows,
/// uint32 cols), then row-major doubles.
inline void dump_matrix(const Eigen::MatrixXd& A, std::ostream& os) {
    const char magic[8] = {'F', 'B', 'M', 'A', 'T', '0', '1', '\0'};
    const std::uint32_t rows = static_cast<std::uint32_t>(A.rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(A.cols());
    os.write(magic, 8);
    os.write(reinterpret_cast<const char*>(&rows), 4);
    os.write(reinterpret_cast<const char*>(&cols), 4);
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            double v = A(i, j);
            os.write(reinterpret_cast<const char*>(&v), 8);
        }
}

inline void dump_operators(const OperatorSet& ops, std::ostream& os) {
    dump_matrix(ops.V, os);
    dump_matrix(ops.K, os);
    dump_matrix(ops.M, os);
    dump_matrix(ops.W, os);
}

} // namespace fembem
