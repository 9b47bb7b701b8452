#pragma once

#include <string>
#include <utility>

#include <Eigen/SparseLU>

#include "fembem/bem.hpp"
#include "fembem/fem.hpp"

namespace fembem {

enum class CouplingMethod { BielakMacCamy, JohnsonNedelec, Symmetric };
enum class SolveStrategy { Newton, DampedPicard };
enum class FailureReason { None, MaxIter, SingularSystem };

inline const char* method_name(CouplingMethod m) {
    switch (m) {
        case CouplingMethod::BielakMacCamy: return "bmc";
        case CouplingMethod::JohnsonNedelec: return "jn";
        default: return "sym";
    }
}

struct SolverConfig {
    double tol = 1e-10;     // relative residual tolerance
    int max_iter = 100;
    SolveStrategy strategy = SolveStrategy::Newton;
    double damping = 0.0;   // DampedPicard step; 0 selects c_ell / c_lip^2
};

struct SolverFailure : std::runtime_error {
    FailureReason reason;
    SolverFailure(FailureReason r, const std::string& msg) : std::runtime_error(msg), reason(r) {}
};

struct CoupledSolution {
    Vector U;                // nodal values, all mesh vertices
    Vector Phi;              // P0 density, one per boundary edge
    int iterations = 0;
    double final_residual = 0.0;
    bool success = false;
    FailureReason reason = FailureReason::None;
    bool small_ellipticity = false; // c_ell <= 1/4 for the non-symmetric couplings
};

struct ProblemData {
    std::function<double(const Vec2&)> f;
    std::function<double(const Vec2&)> u0;
    std::function<double(const Vec2&, const Vec2&)> phi0;
    std::function<Vec2(const Vec2&)> grad_u0; // optional; estimators fall back to the interpolant
};

namespace coupdetail {

/// Linear boundary blocks of the coupled system. The first equation touches
/// only boundary vertex rows, stored boundary-locally (nB rows).
struct Blocks {
    CouplingMethod method;
    Eigen::MatrixXd C_up; // nB x nE: Phi into the first equation
    Eigen::MatrixXd C_pu; // nE x nB: trace of U into the second equation
    Eigen::MatrixXd Wb;   // nB x nB: hypersingular block (Symmetric only)
};

inline Blocks make_blocks(CouplingMethod method, const OperatorSet& ops) {
    Blocks b;
    b.method = method;
    const Eigen::MatrixXd half_m_k = 0.5 * ops.M - ops.K; // nE x nB
    switch (method) {
        case CouplingMethod::BielakMacCamy:
            b.C_up = half_m_k.transpose();
            b.C_pu = -ops.M;
            break;
        case CouplingMethod::JohnsonNedelec:
            b.C_up = -ops.M.transpose();
            b.C_pu = half_m_k;
            break;
        case CouplingMethod::Symmetric:
            b.C_up = -half_m_k.transpose();
            b.C_pu = half_m_k;
            b.Wb = ops.W;
            break;
    }
    return b;
}

inline Eigen::VectorXd boundary_trace(const OperatorSet& ops, const Vector& U) {
    Eigen::VectorXd t(ops.bnodes.size());
    for (std::size_t i = 0; i < ops.bnodes.size(); ++i) t[i] = U[ops.bnodes[i]];
    return t;
}

inline void scatter_boundary(Vector& out, const OperatorSet& ops, const Eigen::VectorXd& contrib) {
    for (std::size_t i = 0; i < ops.bnodes.size(); ++i) out[ops.bnodes[i]] += contrib[i];
}

/// Functional g with s(z) = <1, s_method(z)>_Gamma = g . z for the rank-one
/// stabilization with xi = 1 (the constant P0 function).
inline Vector stabilization_vector(const Blocks& b, const OperatorSet& ops, int nV, int nE) {
    Vector g = Vector::Zero(nV + nE);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(nE);
    Eigen::VectorXd gU;
    if (b.method == CouplingMethod::BielakMacCamy)
        gU = -ops.M.transpose() * ones;       // <1, -u>_Gamma
    else
        gU = (0.5 * ops.M - ops.K).transpose() * ones; // <1, (1/2 - K)u>_Gamma
    for (std::size_t i = 0; i < ops.bnodes.size(); ++i) g[ops.bnodes[i]] = gU[i];
    g.tail(nE) = ops.V.transpose() * ones;    // <1, V phi>_Gamma
    return g;
}

} // namespace coupdetail

/// Right-hand side pair (l1 over vertices, l2 over boundary edges).
struct RhsPair {
    Vector l1;
    Vector l2;
};

/// u0 enters operator applications (K, W) through its P1 nodal interpolant;
/// the direct BMC pairing <psi, -u0> integrates u0 pointwise.
inline RhsPair assemble_rhs(CouplingMethod method, const Mesh& m, const OperatorSet& ops,
                            const ProblemData& data) {
    RhsPair rhs;
    VolumeData vd;
    vd.f = data.f;
    if (data.phi0) vd.phi0 = data.phi0;
    rhs.l1 = assemble_load(m, vd);

    const int nE = static_cast<int>(m.boundary_edges.size());
    rhs.l2 = Vector::Zero(nE);
    if (!data.u0) return rhs;

    Eigen::VectorXd u0b(ops.bnodes.size());
    for (std::size_t i = 0; i < ops.bnodes.size(); ++i) u0b[i] = data.u0(m.vertices[ops.bnodes[i]]);

    if (method == CouplingMethod::BielakMacCamy) {
        for (int e = 0; e < nE; ++e) {
            const Vec2 a = m.vertices[m.boundary_edges[e].a];
            const Vec2 b = m.vertices[m.boundary_edges[e].b];
            rhs.l2[e] = -integrate_segment(a, b, 4, data.u0);
        }
    } else {
        rhs.l2 = (0.5 * ops.M - ops.K) * u0b;
        if (method == CouplingMethod::Symmetric)
            coupdetail::scatter_boundary(rhs.l1, ops, ops.W * u0b);
    }
    return rhs;
}

/// Evaluate the (nonlinear in U) block form against all basis functions.
inline std::pair<Vector, Vector> apply_system(CouplingMethod method, const Mesh& m,
                                              const CoefficientModel& model,
                                              const OperatorSet& ops, const Vector& U,
                                              const Vector& Phi) {
    const coupdetail::Blocks b = coupdetail::make_blocks(method, ops);
    const Eigen::VectorXd tU = coupdetail::boundary_trace(ops, U);
    Vector r1 = apply_nonlinear_form(m, model, U);
    Eigen::VectorXd bnd = b.C_up * Phi;
    if (b.Wb.size() > 0) bnd += b.Wb * tU;
    coupdetail::scatter_boundary(r1, ops, bnd);
    Vector r2 = b.C_pu * tU + ops.V * Phi;
    return {std::move(r1), std::move(r2)};
}

namespace coupdetail {

struct SystemContext {
    const Mesh* mesh;
    const CoefficientModel* model;
    const OperatorSet* ops;
    Blocks blocks;
    Vector l;       // concatenated RHS, stabilization included if enabled
    Vector g;       // stabilization functional (empty when disabled)
    int nV, nE;
};

inline Vector residual_at(const SystemContext& c, const Vector& z) {
    const Vector U = z.head(c.nV);
    const Vector Phi = z.tail(c.nE);
    const Eigen::VectorXd tU = boundary_trace(*c.ops, U);
    Vector bz = Vector::Zero(c.nV + c.nE);
    {
        Vector r1 = apply_nonlinear_form(*c.mesh, *c.model, U);
        Eigen::VectorXd bnd = c.blocks.C_up * Phi;
        if (c.blocks.Wb.size() > 0) bnd += c.blocks.Wb * tU;
        scatter_boundary(r1, *c.ops, bnd);
        bz.head(c.nV) = r1;
    }
    bz.tail(c.nE) = c.blocks.C_pu * tU + c.ops->V * Phi;
    if (c.g.size() > 0) bz += c.g * c.g.dot(z);
    return c.l - bz;
}

/// Coupled Jacobian (linearized A-block plus the linear boundary blocks) as
/// one sparse matrix; dense boundary blocks are inserted entrywise.
inline SparseMatrix jacobian_at(const SystemContext& c, const CoefficientModel& a_model,
                                const Vector& z) {
    const int n = c.nV + c.nE;
    const SparseMatrix S = assemble_linearized_stiffness(*c.mesh, a_model, z.head(c.nV));
    std::vector<Eigen::Triplet<double>> trip;
    const auto& bnodes = c.ops->bnodes;
    const int nB = static_cast<int>(bnodes.size());
    trip.reserve(S.nonZeros() + static_cast<std::size_t>(nB + c.nE) * (nB + c.nE));
    for (int k = 0; k < S.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(S, k); it; ++it)
            trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < nB; ++i)
        for (int j = 0; j < c.nE; ++j) {
            trip.emplace_back(bnodes[i], c.nV + j, c.blocks.C_up(i, j));
            trip.emplace_back(c.nV + j, bnodes[i], c.blocks.C_pu(j, i));
        }
    if (c.blocks.Wb.size() > 0)
        for (int i = 0; i < nB; ++i)
            for (int j = 0; j < nB; ++j)
                trip.emplace_back(bnodes[i], bnodes[j], c.blocks.Wb(i, j));
    for (int j = 0; j < c.nE; ++j)
        for (int k = 0; k < c.nE; ++k)
            trip.emplace_back(c.nV + j, c.nV + k, c.ops->V(j, k));
    if (c.g.size() > 0)
        for (int i = 0; i < n; ++i)
            if (c.g[i] != 0.0)
                for (int j = 0; j < n; ++j)
                    if (c.g[j] != 0.0) trip.emplace_back(i, j, c.g[i] * c.g[j]);
    SparseMatrix J(n, n);
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
}

} // namespace coupdetail

/// Solve the coupled system with preassembled boundary operators. Newton
/// refactorizes the linearized system each step; DampedPicard iterates
/// z += delta P^{-1}(l - B(z)) with P the same system with A = c_ell Id.
inline CoupledSolution solve_with_operators(CouplingMethod method, const Mesh& m,
                                            const CoefficientModel& model,
                                            const OperatorSet& ops, const ProblemData& data,
                                            const SolverConfig& cfg, bool stabilized = false) {
    using namespace coupdetail;
    const int nV = static_cast<int>(m.vertices.size());
    const int nE = static_cast<int>(m.boundary_edges.size());

    SystemContext ctx;
    ctx.mesh = &m;
    ctx.model = &model;
    ctx.ops = &ops;
    ctx.blocks = make_blocks(method, ops);
    ctx.nV = nV;
    ctx.nE = nE;

    const RhsPair rhs = assemble_rhs(method, m, ops, data);
    ctx.l = Vector::Zero(nV + nE);
    ctx.l.head(nV) = rhs.l1;
    ctx.l.tail(nE) = rhs.l2;
    if (stabilized) {
        ctx.g = stabilization_vector(ctx.blocks, ops, nV, nE);
        ctx.l += rhs.l2.sum() * ctx.g; // <xi, l2>_Gamma <xi, s(test)>_Gamma
    }

    const double scale = std::max(ctx.l.norm(), 1e-300);

    CoupledSolution sol;
    sol.small_ellipticity = (method != CouplingMethod::Symmetric && model.c_ell <= 0.25);

    Vector z = Vector::Zero(nV + nE);
    Eigen::SparseLU<SparseMatrix> lu;
    auto factor = [&](const SparseMatrix& J) {
        lu.compute(J);
        if (lu.info() != Eigen::Success)
            throw SolverFailure(FailureReason::SingularSystem,
                                "coupled linear system is singular");
    };

    double rel = residual_at(ctx, z).norm() / scale;
    int it = 0;
    if (cfg.strategy == SolveStrategy::Newton) {
        while (rel > cfg.tol && it < cfg.max_iter) {
            factor(jacobian_at(ctx, model, z));
            z += lu.solve(residual_at(ctx, z));
            ++it;
            rel = residual_at(ctx, z).norm() / scale;
            if (!std::isfinite(rel))
                throw SolverFailure(FailureReason::SingularSystem,
                                    "solver produced non-finite iterate");
        }
    } else {
        CoefficientModel lin = make_identity();
        const double ce = model.c_ell;
        lin.apply = [ce](const Vec2& y) { return ce * y; };
        lin.jacobian = [ce](const Vec2&) { return Mat2{ce, 0, 0, ce}; };
        factor(jacobian_at(ctx, lin, z));
        const double delta = cfg.damping > 0.0 ? cfg.damping
                                               : model.c_ell / (model.c_lip * model.c_lip);
        while (rel > cfg.tol && it < cfg.max_iter) {
            z += delta * lu.solve(residual_at(ctx, z));
            ++it;
            rel = residual_at(ctx, z).norm() / scale;
            if (!std::isfinite(rel))
                throw SolverFailure(FailureReason::SingularSystem,
                                    "solver produced non-finite iterate");
        }
    }

    sol.U = z.head(nV);
    sol.Phi = z.tail(nE);
    sol.iterations = it;
    sol.final_residual = rel;
    sol.success = rel <= cfg.tol;
    sol.reason = sol.success ? FailureReason::None : FailureReason::MaxIter;
    return sol;
}

inline CoupledSolution solve(CouplingMethod method, const Mesh& m, const CoefficientModel& model,
                             const ProblemData& data, const SolverConfig& cfg = {}) {
    const OperatorSet ops = assemble_operators(m);
    return solve_with_operators(method, m, model, ops, data, cfg, false);
}

/// Rank-one stabilized variant (xi = constant 1 P0 function); by the
/// equivalence theorems its solution coincides with solve's.
inline CoupledSolution solve_stabilized(CouplingMethod method, const Mesh& m,
                                        const CoefficientModel& model, const ProblemData& data,
                                        const SolverConfig& cfg = {}) {
    const OperatorSet ops = assemble_operators(m);
    return solve_with_operators(method, m, model, ops, data, cfg, true);
}

/// Computable discrete energy norm (||grad .||^2 + ||.||^2_{L2} + <phi, V phi>)^{1/2}.
inline double energy_norm(const Mesh& m, const OperatorSet& ops, const Vector& U,
                          const Vector& Phi) {
    return std::sqrt(p1_h1_seminorm_sq(m, U) + p1_l2_norm_sq(m, U) + Phi.dot(ops.V * Phi));
}

} // namespace fembem
