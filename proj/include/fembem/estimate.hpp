#pragma once

#include <ostream>

#include "fembem/coupling.hpp"

namespace fembem {

/// Squared residual indicators per entity plus the totals
/// zeta^2 = (zeta^Omega)^2 + (zeta^Gamma)^2.
struct EstimatorBreakdown {
    std::vector<double> triangle;      // h_T^2 ||f||^2_{L2(T)}
    std::vector<double> interior_edge; // h_E ||[A grad U . nu]||^2_{L2(E)}
    std::vector<double> boundary_edge; // method-specific boundary residuals
    double total_sq = 0.0;
    double omega_sq = 0.0;
    double gamma_sq = 0.0;
};

inline EstimatorBreakdown estimate(CouplingMethod method, const Mesh& m,
                                   const CoefficientModel& model, const ProblemData& data,
                                   const CoupledSolution& sol, int boundary_quad_order = 4) {
    EstimatorBreakdown est;
    const int nT = static_cast<int>(m.triangles.size());
    const int nI = static_cast<int>(m.interior_edges.size());
    const int nE = static_cast<int>(m.boundary_edges.size());
    est.triangle.assign(nT, 0.0);
    est.interior_edge.assign(nI, 0.0);
    est.boundary_edge.assign(nE, 0.0);

    // Volume residual h_T^2 ||f||^2 (f = -div A grad U exactly for P1 fluxes).
    if (data.f) {
        for (int t = 0; t < nT; ++t) {
            const Triangle& T = m.triangles[t];
            const double h2 = m.area(t); // h_T = |T|^{1/2}
            const double nrm = integrate_triangle(m.vertices[T.v[0]], m.vertices[T.v[1]],
                                                  m.vertices[T.v[2]], [&](const Vec2& x) {
                                                      double v = data.f(x);
                                                      return v * v;
                                                  });
            est.triangle[t] = h2 * nrm;
        }
    }

    // Normal-flux jumps across interior edges (piecewise-constant fluxes).
    std::vector<Vec2> flux(nT);
    for (int t = 0; t < nT; ++t) flux[t] = model.apply(p1_gradient_of(m, t, sol.U));
    for (int e = 0; e < nI; ++e) {
        const InteriorEdge& E = m.interior_edges[e];
        const Vec2 d = m.vertices[E.b] - m.vertices[E.a];
        const double hE = norm(d);
        const Vec2 nu{d.y / hE, -d.x / hE};
        const double jump = dot(flux[E.tri_plus] - flux[E.tri_minus], nu);
        est.interior_edge[e] = hE * hE * jump * jump; // h_E * |E| * jump^2
    }

    // Boundary residuals. u0 enters the operators (K, W) through its nodal
    // interpolant; direct terms evaluate u0 / its tangential derivative
    // pointwise when available.
    Vector u0_minus_U = Vector::Zero(m.vertices.size());
    std::vector<int> bverts = m.boundary_vertices();
    for (int v : bverts) u0_minus_U[v] = (data.u0 ? data.u0(m.vertices[v]) : 0.0) - sol.U[v];

    for (int e = 0; e < nE; ++e) {
        const BoundaryEdge& E = m.boundary_edges[e];
        const Vec2 a = m.vertices[E.a], b = m.vertices[E.b];
        const double hE = norm(b - a);
        const Vec2 tau = (b - a) / hE;
        const double flux_nu = dot(flux[E.tri], E.nu);
        const double dU_ds = (sol.U[E.b] - sol.U[E.a]) / hE;
        const double du0_interp = ((data.u0 ? data.u0(b) : 0.0) - (data.u0 ? data.u0(a) : 0.0)) / hE;

        double s1 = 0.0, s2 = 0.0;
        for (const QuadPoint1D& q : gauss_legendre(boundary_quad_order)) {
            const Vec2 x = a + q.x * (b - a);
            const double phi0 = data.phi0 ? data.phi0(x, E.nu) : 0.0;
            const double du0_ds = data.grad_u0 ? dot(data.grad_u0(x), tau) : du0_interp;

            double r1 = 0.0, r2 = 0.0;
            switch (method) {
                case CouplingMethod::BielakMacCamy:
                    // phi0 + (K' - 1/2) Phi - A grad U . nu
                    r1 = phi0 + eval_Kadj(m, sol.Phi, e, x) - 0.5 * sol.Phi[e] - flux_nu;
                    // d/ds (U - u0 - V Phi)
                    r2 = dU_ds - du0_ds - eval_V_arcderiv(m, sol.Phi, e, x);
                    break;
                case CouplingMethod::JohnsonNedelec:
                    r1 = phi0 + sol.Phi[e] - flux_nu;
                    // d/ds ((1/2 - K)(u0 - U) - V Phi)
                    r2 = 0.5 * (du0_ds - dU_ds) - eval_K_arcderiv(m, u0_minus_U, e, x) -
                         eval_V_arcderiv(m, sol.Phi, e, x);
                    break;
                case CouplingMethod::Symmetric:
                    // phi0 - A grad U . nu + W(u0 - U) - (K' - 1/2) Phi
                    r1 = phi0 - flux_nu + eval_W(m, u0_minus_U, e, x) -
                         eval_Kadj(m, sol.Phi, e, x) + 0.5 * sol.Phi[e];
                    r2 = 0.5 * (du0_ds - dU_ds) - eval_K_arcderiv(m, u0_minus_U, e, x) -
                         eval_V_arcderiv(m, sol.Phi, e, x);
                    break;
            }
            s1 += hE * q.w * r1 * r1;
            s2 += hE * q.w * r2 * r2;
        }
        est.boundary_edge[e] = hE * (s1 + s2);
    }

    for (double v : est.triangle) est.omega_sq += v;
    for (double v : est.interior_edge) est.omega_sq += v;
    for (double v : est.boundary_edge) est.gamma_sq += v;
    est.total_sq = est.omega_sq + est.gamma_sq;
    return est;
}

inline double efficiency_index(const EstimatorBreakdown& est, double err_omega) {
    if (!(err_omega > 0.0))
        throw std::invalid_argument("efficiency_index: err_omega must be positive");
    return std::sqrt(est.omega_sq) / err_omega;
}

/// CSV dump of all squared indicators.
inline void dump_indicators(const EstimatorBreakdown& est, std::ostream& os) {
    os.precision(17);
    os << "entity_kind,entity_id,indicator_sq\n";
    for (std::size_t i = 0; i < est.triangle.size(); ++i)
        os << "triangle," << i << "," << est.triangle[i] << "\n";
    for (std::size_t i = 0; i < est.interior_edge.size(); ++i)
        os << "interior_edge," << i << "," << est.interior_edge[i] << "\n";
    for (std::size_t i = 0; i < est.boundary_edge.size(); ++i)
        os << "boundary_edge," << i << "," << est.boundary_edge[i] << "\n";
}

} // namespace fembem
