#pragma once

#include <iomanip>
#include <ostream>
#include <random>

#include <Eigen/Eigenvalues>

#include "fembem/bench.hpp"

namespace fembem {

namespace verifydetail {

inline bool report(std::ostream& os, const std::string& name, bool ok, double value = 0.0) {
    os << (ok ? "  [pass] " : "  [FAIL] ") << name;
    if (value != 0.0) os << "  (" << std::setprecision(3) << value << ")";
    os << "\n";
    return ok;
}

/// b_method(z, z) via the block form action.
inline double quadratic_form(CouplingMethod method, const Mesh& m, const CoefficientModel& model,
                             const OperatorSet& ops, const Vector& U, const Vector& Phi) {
    auto [r1, r2] = apply_system(method, m, model, ops, U, Phi);
    return U.dot(r1) + Phi.dot(r2);
}

} // namespace verifydetail

/// Boundary operator identities on both benchmark domains.
inline bool verify_ops(std::ostream& os) {
    using verifydetail::report;
    bool ok = true;
    for (Domain d : {Domain::LShape, Domain::ZShape}) {
        const char* dn = d == Domain::LShape ? "L-shape" : "Z-shape";
        Mesh m = refine_uniform(build_initial(d), 2);
        OperatorSet ops = assemble_operators(m);
        const int nE = static_cast<int>(ops.V.rows());
        const int nB = static_cast<int>(ops.W.rows());
        const double vmax = ops.V.cwiseAbs().maxCoeff();

        ok &= report(os, std::string(dn) + ": V symmetric",
                     (ops.V - ops.V.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * vmax);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ops.V);
        ok &= report(os, std::string(dn) + ": V positive definite",
                     eig.eigenvalues().minCoeff() > 0.0, eig.eigenvalues().minCoeff());
        const Eigen::VectorXd ones_b = Eigen::VectorXd::Ones(nB);
        const double mscale = ops.M.cwiseAbs().rowwise().sum().maxCoeff();
        ok &= report(os, std::string(dn) + ": (M/2 + K) 1 = 0",
                     ((0.5 * ops.M + ops.K) * ones_b).cwiseAbs().maxCoeff() <= 1e-12 * mscale);
        ok &= report(os, std::string(dn) + ": W 1 = 0",
                     (ops.W * ones_b).cwiseAbs().maxCoeff() <= 1e-12 * vmax);

        // pointwise: K applied to a constant is -c/2 on the boundary
        Vector cu = Vector::Constant(m.vertices.size(), 2.5);
        Vector zero_phi = Vector::Zero(nE);
        bool kc = true, wc = true;
        for (int e = 0; e < std::min(nE, 8); ++e) {
            const Vec2 a = m.vertices[m.boundary_edges[e].a];
            const Vec2 b = m.vertices[m.boundary_edges[e].b];
            const Vec2 x = a + 0.37 * (b - a);
            kc = kc && std::abs(eval_K(m, cu, x) + 1.25) <= 1e-12;
            wc = wc && std::abs(eval_W(m, cu, e, x)) <= 1e-12;
        }
        ok &= report(os, std::string(dn) + ": K const = -const/2 pointwise", kc);
        ok &= report(os, std::string(dn) + ": W const = 0 pointwise", wc);
    }
    return ok;
}

/// Coupled-form identities and stabilization equivalence on a coarse mesh.
inline bool verify_coupling(std::ostream& os) {
    using verifydetail::report;
    bool ok = true;
    const ProblemSpec spec = make_problem(ProblemName::LShapeLaplace);
    Mesh m = refine_uniform(build_initial(spec.domain), 2);
    OperatorSet ops = assemble_operators(m);
    const int nV = static_cast<int>(m.vertices.size());
    const int nE = static_cast<int>(m.boundary_edges.size());

    std::mt19937 rng(7);
    std::normal_distribution<double> nd;
    bool quad = true;
    for (int k = 0; k < 100; ++k) {
        Vector U(nV), Phi(nE);
        for (int i = 0; i < nV; ++i) U[i] = nd(rng);
        for (int i = 0; i < nE; ++i) Phi[i] = nd(rng);
        const double b_jn = verifydetail::quadratic_form(CouplingMethod::JohnsonNedelec, m,
                                                         spec.model, ops, U, Phi);
        const double b_bmc = verifydetail::quadratic_form(CouplingMethod::BielakMacCamy, m,
                                                          spec.model, ops, U, Phi);
        quad = quad && std::abs(b_jn - b_bmc) <= 1e-12 * std::max(std::abs(b_jn), 1.0);
    }
    ok &= report(os, "b_jn(u,u) = b_bmc(u,u), 100 random vectors", quad);

    for (CouplingMethod method : {CouplingMethod::BielakMacCamy, CouplingMethod::JohnsonNedelec,
                                  CouplingMethod::Symmetric}) {
        SolverConfig cfg;
        CoupledSolution plain = solve_with_operators(method, m, spec.model, ops, spec.data, cfg,
                                                     false);
        CoupledSolution stab = solve_with_operators(method, m, spec.model, ops, spec.data, cfg,
                                                    true);
        const double dist = energy_norm(m, ops, plain.U - stab.U, plain.Phi - stab.Phi);
        const double scale = std::max(energy_norm(m, ops, plain.U, plain.Phi), 1e-300);
        ok &= report(os, std::string("stabilized = plain (") + method_name(method) + ")",
                     plain.success && stab.success && dist <= 1e-8 * scale, dist / scale);
    }
    return ok;
}

/// Doerfler marking properties and mesh invariants under random refinement.
inline bool verify_adapt(std::ostream& os) {
    using verifydetail::report;
    bool ok = true;
    Mesh m = build_initial(Domain::LShape);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> ud(0.0, 1.0);

    bool feasible = true, minimal = true;
    for (int trial = 0; trial < 50; ++trial) {
        EstimatorBreakdown est;
        est.triangle.resize(m.triangles.size());
        est.interior_edge.resize(m.interior_edges.size());
        est.boundary_edge.resize(m.boundary_edges.size());
        double tot = 0;
        for (auto* v : {&est.triangle, &est.interior_edge, &est.boundary_edge})
            for (double& x : *v) {
                x = ud(rng);
                tot += x;
            }
        est.total_sq = tot;
        const double theta = 0.1 + 0.8 * ud(rng);
        // reconstruct the greedy prefix sum to check feasibility and minimality
        std::vector<double> all;
        for (auto* v : {&est.triangle, &est.interior_edge, &est.boundary_edge})
            all.insert(all.end(), v->begin(), v->end());
        std::sort(all.begin(), all.end(), std::greater<double>());
        double acc = 0;
        std::size_t count = 0;
        while (acc < theta * tot && count < all.size()) acc += all[count++];
        feasible = feasible && acc >= theta * tot;
        minimal = minimal && (count == 0 || acc - all[count - 1] < theta * tot);
        MarkResult mr = doerfler_mark(m, est, theta);
        feasible = feasible && !mr.marks.empty();
    }
    ok &= report(os, "Doerfler greedy prefix feasible", feasible);
    ok &= report(os, "Doerfler greedy prefix minimal", minimal);

    bool invariants = true;
    const double area0 = m.total_area();
    for (int level = 0; level < 8; ++level) {
        MarkSet marks;
        for (std::size_t t = 0; t < m.triangles.size(); ++t)
            if (ud(rng) < 0.3) marks.triangles.push_back(static_cast<int>(t));
        if (marks.triangles.empty()) marks.triangles.push_back(0);
        Mesh next = refine_nvb(m, marks);
        try {
            check_mesh(next);
        } catch (const std::exception&) {
            invariants = false;
        }
        invariants = invariants && std::abs(next.total_area() - area0) <= 1e-12;
        invariants = invariants && next.triangles.size() > m.triangles.size();
        invariants = invariants && shape_regularity(next) <= 2.0 * shape_regularity(build_initial(Domain::LShape)) + 16.0;
        m = next;
    }
    ok &= report(os, "NVB invariants over 8 random-marking levels", invariants);
    return ok;
}

inline bool verify_all(std::ostream& os) {
    bool ok = true;
    os << "operator suite\n";
    ok &= verify_ops(os);
    os << "coupling suite\n";
    ok &= verify_coupling(os);
    os << "adaptivity suite\n";
    ok &= verify_adapt(os);
    return ok;
}

} // namespace fembem
