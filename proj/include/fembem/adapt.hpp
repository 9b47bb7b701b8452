#pragma once

#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "fembem/estimate.hpp"

namespace fembem {

enum class RefineStrategy { Adaptive, Uniform };

struct AdaptiveConfig {
    CouplingMethod method = CouplingMethod::JohnsonNedelec;
    double theta = 0.25;          // Doerfler parameter; theta = 1 behaves like Uniform
    int max_elements = 10000;
    SolverConfig solver;
    RefineStrategy strategy = RefineStrategy::Adaptive;
    int quadrature_order = 4; // boundary Gauss order of the estimator
};

struct RunRow {
    int level = 0;
    int n_triangles = 0;
    int n_boundary_edges = 0;
    double h_max = 0.0;
    double err_omega = std::numeric_limits<double>::quiet_NaN(); // NaN = unknown exact solution
    double est_total = 0.0;
    double est_omega = 0.0;
    double est_gamma = 0.0;
    int solver_iters = 0;
    double time_seconds = 0.0;
    std::string flags; // semicolon-separated tokens
};

struct RunLog {
    std::vector<RunRow> rows;
};

/// Everything the adaptive loop needs about a benchmark problem. log_charge
/// is the coefficient a of the a log|x| far-field of the exterior solution;
/// the compatibility integral then reads <f,1> + <phi0,1> + 2 pi a.
struct AdaptiveProblem {
    Mesh initial;
    CoefficientModel model;
    ProblemData data;
    std::function<double(const Vec2&)> exact_u;    // optional
    std::function<Vec2(const Vec2&)> exact_grad_u; // optional
    double log_charge = 0.0;
};

struct MarkResult {
    MarkSet marks;
    bool converged = false; // zero total estimator
};

/// Greedy Doerfler marking: smallest descending-sorted prefix of indicators
/// with sum >= theta * zeta^2; ties broken by (entity kind, entity id).
/// Interior-edge picks mark both adjacent triangles, boundary-edge picks the
/// boundary edge itself.
inline MarkResult doerfler_mark(const Mesh& m, const EstimatorBreakdown& est, double theta) {
    if (!(theta > 0.0 && theta <= 1.0))
        throw std::invalid_argument("doerfler_mark: theta must be in (0,1]");
    MarkResult res;
    if (!(est.total_sq > 0.0)) {
        res.converged = true;
        return res;
    }
    struct Item {
        double val;
        int kind; // 0 triangle, 1 interior edge, 2 boundary edge
        int id;
    };
    std::vector<Item> items;
    items.reserve(est.triangle.size() + est.interior_edge.size() + est.boundary_edge.size());
    for (std::size_t i = 0; i < est.triangle.size(); ++i)
        items.push_back({est.triangle[i], 0, static_cast<int>(i)});
    for (std::size_t i = 0; i < est.interior_edge.size(); ++i)
        items.push_back({est.interior_edge[i], 1, static_cast<int>(i)});
    for (std::size_t i = 0; i < est.boundary_edge.size(); ++i)
        items.push_back({est.boundary_edge[i], 2, static_cast<int>(i)});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        if (a.val != b.val) return a.val > b.val;
        return std::make_pair(a.kind, a.id) < std::make_pair(b.kind, b.id);
    });
    const double goal = theta * est.total_sq;
    double acc = 0.0;
    for (const Item& it : items) {
        if (acc >= goal) break;
        acc += it.val;
        switch (it.kind) {
            case 0:
                res.marks.triangles.push_back(it.id);
                break;
            case 1:
                res.marks.triangles.push_back(m.interior_edges[it.id].tri_plus);
                res.marks.triangles.push_back(m.interior_edges[it.id].tri_minus);
                break;
            default:
                res.marks.boundary_edges.push_back(it.id);
                break;
        }
    }
    auto dedup = [](std::vector<int>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    dedup(res.marks.triangles);
    dedup(res.marks.boundary_edges);
    return res;
}

namespace adaptdetail {

inline void append_flag(std::string& flags, const std::string& f) {
    if (!flags.empty()) flags += ';';
    flags += f;
}

/// Nodal prolongation onto a once-refined mesh (new vertices are edge
/// midpoints, value = parent average; exact for P1).
inline Vector prolong_nodal(const Mesh& fine, const Vector& coarse_u) {
    Vector out(fine.vertices.size());
    for (std::size_t i = 0; i < fine.vertices.size(); ++i) {
        const auto& p = fine.vertex_parents[i];
        if (p[0] == p[1] && p[0] == static_cast<int>(i))
            out[i] = coarse_u[i];
        else
            out[i] = 0.5 * (coarse_u[p[0]] + coarse_u[p[1]]);
    }
    return out;
}

inline Vector prolong_density(const Mesh& coarse, const Mesh& fine, const Vector& coarse_phi) {
    const std::vector<int> parent = map_boundary_edges(coarse, fine);
    Vector out(fine.boundary_edges.size());
    for (std::size_t j = 0; j < fine.boundary_edges.size(); ++j) out[j] = coarse_phi[parent[j]];
    return out;
}

/// 7-point rule on a uniform subdivision of the triangle (4^depth pieces).
template <class F>
double integrate_triangle_refined(const Vec2& p0, const Vec2& p1, const Vec2& p2, F&& f,
                                  int depth = 3) {
    if (depth == 0) return integrate_triangle(p0, p1, p2, f);
    const Vec2 m01 = midpoint(p0, p1), m12 = midpoint(p1, p2), m02 = midpoint(p0, p2);
    return integrate_triangle_refined(p0, m01, m02, f, depth - 1) +
           integrate_triangle_refined(m01, p1, m12, f, depth - 1) +
           integrate_triangle_refined(m02, m12, p2, f, depth - 1) +
           integrate_triangle_refined(m01, m12, m02, f, depth - 1);
}

/// Integrate f over the triangle (c, p1, p2) where the integrand may be
/// singular at the corner c: geometric splitting toward c, refined 7-point
/// rule on each annular piece.
template <class F>
double integrate_triangle_corner(const Vec2& c, const Vec2& p1, const Vec2& p2, F&& f,
                                 int levels = 80) {
    double s = 0.0;
    Vec2 a1 = p1, b1 = p2;
    for (int k = 0; k < levels; ++k) {
        const Vec2 a2 = c + 0.5 * (a1 - c), b2 = c + 0.5 * (b1 - c);
        s += integrate_triangle_refined(a2, a1, b1, f, 2);
        s += integrate_triangle_refined(a2, b1, b2, f, 2);
        a1 = a2;
        b1 = b2;
    }
    s += integrate_triangle(c, a1, b1, f); // innermost sliver, rule points are interior
    return s;
}

/// <f,1>_Omega + <phi0,1>_Gamma + 2 pi a; should vanish when the exterior
/// solution decays (or its log charge a is accounted for). Quadrature is
/// graded toward the reentrant corner at the origin, where the benchmark
/// data may be singular.
inline double compatibility_defect(const Mesh& m, const ProblemData& data, double log_charge,
                                   double& scale) {
    const auto at_origin = [](const Vec2& v) { return norm(v) < 1e-14; };
    double vol = 0.0, vol_abs = 0.0;
    if (data.f) {
        auto fabsval = [&](const Vec2& x) { return std::abs(data.f(x)); };
        for (std::size_t t = 0; t < m.triangles.size(); ++t) {
            const Triangle& T = m.triangles[t];
            const std::array<Vec2, 3> p = {m.vertices[T.v[0]], m.vertices[T.v[1]],
                                           m.vertices[T.v[2]]};
            int corner = -1;
            for (int i = 0; i < 3; ++i)
                if (at_origin(p[i])) corner = i;
            if (corner >= 0) {
                vol += integrate_triangle_corner(p[corner], p[(corner + 1) % 3],
                                                 p[(corner + 2) % 3], data.f);
                vol_abs += integrate_triangle_corner(p[corner], p[(corner + 1) % 3],
                                                     p[(corner + 2) % 3], fabsval);
            } else {
                vol += integrate_triangle_refined(p[0], p[1], p[2], data.f);
                vol_abs += integrate_triangle_refined(p[0], p[1], p[2], fabsval);
            }
        }
    }
    double bnd = 0.0, bnd_abs = 0.0;
    if (data.phi0)
        for (const BoundaryEdge& e : m.boundary_edges) {
            const Vec2 a = m.vertices[e.a], b = m.vertices[e.b];
            auto g = [&](const Vec2& x) { return data.phi0(x, e.nu); };
            auto gabs = [&](const Vec2& x) { return std::abs(data.phi0(x, e.nu)); };
            if (at_origin(a) || at_origin(b)) {
                bnd += bemdetail::integrate_graded(a, b, at_origin(a), 80, 12, g);
                bnd_abs += bemdetail::integrate_graded(a, b, at_origin(a), 80, 12, gabs);
            } else {
                bnd += integrate_segment(a, b, 24, g);
                bnd_abs += integrate_segment(a, b, 24, gabs);
            }
        }
    scale = std::max(1.0, vol_abs + bnd_abs + 2.0 * M_PI * std::abs(log_charge));
    return vol + bnd + 2.0 * M_PI * log_charge;
}

} // namespace adaptdetail

struct RunResult {
    RunLog log;
    std::vector<double> increments; // energy norm of level-to-level solution differences
    Mesh final_mesh;
    CoupledSolution final_solution;
};

/// The adaptive loop: solve -> estimate -> mark -> refine until the triangle
/// count exceeds cfg.max_elements. Uniform strategy marks everything. Every
/// level is logged, including the first one past the element budget.
inline RunResult run(const AdaptiveProblem& problem, const AdaptiveConfig& cfg) {
    using clock = std::chrono::steady_clock;
    RunResult out;
    Mesh mesh = problem.initial;

    std::string base_flags;
    {
        double scale = 1.0;
        const double defect =
            adaptdetail::compatibility_defect(mesh, problem.data, problem.log_charge, scale);
        if (std::abs(defect) > 1e-8 * scale)
            adaptdetail::append_flag(base_flags, "incompatible_data");
    }

    Mesh prev_mesh;
    CoupledSolution prev_sol;
    bool have_prev = false;
    double cumulative = 0.0;

    for (int level = 0;; ++level) {
        const auto t0 = clock::now();
        RunRow row;
        row.level = level;
        row.n_triangles = static_cast<int>(mesh.triangles.size());
        row.n_boundary_edges = static_cast<int>(mesh.boundary_edges.size());
        row.h_max = h_max(mesh);
        row.flags = base_flags;

        OperatorSet ops;
        CoupledSolution sol;
        bool failed = false;
        try {
            ops = assemble_operators(mesh);
            sol = solve_with_operators(cfg.method, mesh, problem.model, ops, problem.data,
                                       cfg.solver);
        } catch (const SolverFailure&) {
            adaptdetail::append_flag(row.flags, "solver_failure");
            failed = true;
        }
        if (!failed && !sol.success) {
            adaptdetail::append_flag(row.flags, "solver_failure");
            failed = true;
        }
        if (failed) {
            out.log.rows.push_back(row);
            break;
        }
        if (sol.small_ellipticity) adaptdetail::append_flag(row.flags, "small_ellipticity");
        row.solver_iters = sol.iterations;

        const EstimatorBreakdown est =
            estimate(cfg.method, mesh, problem.model, problem.data, sol, cfg.quadrature_order);
        row.est_total = std::sqrt(est.total_sq);
        row.est_omega = std::sqrt(est.omega_sq);
        row.est_gamma = std::sqrt(est.gamma_sq);
        if (problem.exact_u && problem.exact_grad_u)
            row.err_omega = h1_error(mesh, sol.U, problem.exact_u, problem.exact_grad_u);

        if (have_prev) {
            Vector dU = sol.U - adaptdetail::prolong_nodal(mesh, prev_sol.U);
            Vector dPhi = sol.Phi - adaptdetail::prolong_density(prev_mesh, mesh, prev_sol.Phi);
            out.increments.push_back(energy_norm(mesh, ops, dU, dPhi));
        }

        MarkResult mark;
        bool stop = static_cast<int>(mesh.triangles.size()) > cfg.max_elements;
        if (!stop && cfg.strategy == RefineStrategy::Adaptive) {
            mark = doerfler_mark(mesh, est, cfg.theta);
            if (mark.converged) {
                adaptdetail::append_flag(row.flags, "converged");
                stop = true;
            }
        }

        const double dt = std::chrono::duration<double>(clock::now() - t0).count();
        // Adaptive timing is cumulative over levels; uniform is per level.
        cumulative += dt;
        row.time_seconds = (cfg.strategy == RefineStrategy::Adaptive) ? cumulative : dt;
        out.log.rows.push_back(row);

        if (stop) {
            out.final_mesh = mesh;
            out.final_solution = sol;
            break;
        }

        prev_mesh = mesh;
        prev_sol = sol;
        have_prev = true;
        if (cfg.strategy == RefineStrategy::Uniform)
            mesh = refine_uniform(mesh, 1);
        else
            mesh = refine_nvb(mesh, mark.marks);
        out.final_mesh = mesh;
        out.final_solution = sol;
    }
    return out;
}

inline void write_run_csv(const RunLog& log, std::ostream& os) {
    os.precision(17);
    os << "level,n_triangles,n_boundary_edges,h_max,err_omega,est_total,est_omega,est_gamma,"
          "solver_iters,time_seconds,flags\n";
    for (const RunRow& r : log.rows) {
        os << r.level << ',' << r.n_triangles << ',' << r.n_boundary_edges << ',' << r.h_max
           << ',';
        if (std::isfinite(r.err_omega)) os << r.err_omega;
        os << ',' << r.est_total << ',' << r.est_omega << ',' << r.est_gamma << ','
           << r.solver_iters << ',' << r.time_seconds << ',' << r.flags << "\n";
    }
}

inline RunLog read_run_csv(std::istream& is) {
    RunLog log;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("run csv: empty file");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(ss, field, ',')) f.push_back(field);
        while (f.size() < 11) f.push_back("");
        RunRow r;
        r.level = std::stoi(f[0]);
        r.n_triangles = std::stoi(f[1]);
        r.n_boundary_edges = std::stoi(f[2]);
        r.h_max = std::stod(f[3]);
        r.err_omega = f[4].empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[4]);
        r.est_total = std::stod(f[5]);
        r.est_omega = std::stod(f[6]);
        r.est_gamma = std::stod(f[7]);
        r.solver_iters = std::stoi(f[8]);
        r.time_seconds = std::stod(f[9]);
        r.flags = f[10];
        log.rows.push_back(r);
    }
    return log;
}

struct ReductionFit {
    double kappa = 1.0;
    double C = 0.0;
    double fraction = 0.0; // share of levels satisfying the inequality with (kappa, C)
    bool feasible = false; // some kappa < 1 works for >= 90% of levels
};

/// Empirical fit of zeta_{l+1}^2 <= kappa zeta_l^2 + C d_l^2: smallest kappa
/// on a fine grid admitting a C >= 0 that satisfies the inequality on at
/// least 90% of the levels; C is then the smallest such constant.
inline ReductionFit estimator_reduction_fit(const RunLog& log,
                                            const std::vector<double>& increments) {
    const std::size_t L = log.rows.size();
    if (L < 5 || increments.size() + 1 < L)
        throw std::invalid_argument("estimator_reduction_fit: need >= 5 levels with increments");
    const std::size_t n = L - 1;
    std::vector<double> z0(n), z1(n), dsq(n);
    for (std::size_t l = 0; l < n; ++l) {
        z0[l] = log.rows[l].est_total * log.rows[l].est_total;
        z1[l] = log.rows[l + 1].est_total * log.rows[l + 1].est_total;
        dsq[l] = increments[l] * increments[l];
    }
    const std::size_t need = (9 * n + 9) / 10; // ceil(0.9 n)
    const double inf = std::numeric_limits<double>::infinity();

    auto required_C = [&](double kappa) {
        std::vector<double> req(n);
        for (std::size_t l = 0; l < n; ++l) {
            const double excess = z1[l] - kappa * z0[l];
            if (excess <= 1e-12 * std::max(z0[l], z1[l]))
                req[l] = 0.0;
            else
                req[l] = dsq[l] > 0.0 ? excess / dsq[l] : inf;
        }
        std::sort(req.begin(), req.end());
        return req[need - 1]; // smallest C covering 90% of the levels
    };

    ReductionFit fit;
    for (int k = 0; k < 1000; ++k) {
        const double kappa = k * 1e-3;
        const double C = required_C(kappa);
        if (std::isfinite(C)) {
            fit.kappa = kappa;
            fit.C = C;
            fit.feasible = true;
            break;
        }
    }
    if (!fit.feasible) return fit;
    std::size_t ok = 0;
    for (std::size_t l = 0; l < n; ++l)
        if (z1[l] <= fit.kappa * z0[l] + fit.C * dsq[l] + 1e-12 * std::max(z0[l], z1[l])) ++ok;
    fit.fraction = static_cast<double>(ok) / static_cast<double>(n);
    return fit;
}

} // namespace fembem
