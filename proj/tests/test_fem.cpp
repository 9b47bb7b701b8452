#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fembem/bench.hpp"

using namespace fembem;

namespace {

/// Single positively oriented triangle as a standalone mesh.
Mesh single_triangle(const Vec2& p0, const Vec2& p1, const Vec2& p2) {
    Mesh m;
    m.vertices = {p0, p1, p2};
    m.triangles.push_back({{0, 1, 2}, 0, 0});
    m.vertex_parents = {{0, 0}, {1, 1}, {2, 2}};
    detail::init_ref_edges_longest(m);
    detail::build_edges(m);
    return m;
}

} // namespace

TEST_CASE("apply_nonlinear_form: zero gradient and linear equivalence", "[fem]") {
    const Mesh m = refine_uniform(build_initial(Domain::LShape), 1);
    const CoefficientModel id = make_identity();

    Vector c = Vector::Constant(m.vertices.size(), 3.25);
    CHECK(apply_nonlinear_form(m, id, c).lpNorm<Eigen::Infinity>() < 1e-14);

    std::mt19937 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    Vector U(m.vertices.size());
    for (int i = 0; i < U.size(); ++i) U[i] = g(rng);
    const SparseMatrix A = assemble_linearized_stiffness(m, id, U);
    const Vector via_matrix = A * U;
    const Vector via_form = apply_nonlinear_form(m, id, U);
    CHECK((via_matrix - via_form).lpNorm<Eigen::Infinity>() <=
          1e-13 * via_matrix.lpNorm<Eigen::Infinity>());
}

TEST_CASE("element stiffness on the unit right triangle", "[fem]") {
    const Mesh m = single_triangle({0, 0}, {1, 0}, {0, 1});
    const CoefficientModel id = make_identity();

    // Hat at the right-angle vertex: diagonal entry 1.
    Vector hat = Vector::Zero(3);
    hat[0] = 1.0;
    CHECK(apply_nonlinear_form(m, id, hat)[0] == Catch::Approx(1.0).epsilon(1e-14));

    // Identity stiffness has zero row sums (constants in the kernel).
    const SparseMatrix A = assemble_linearized_stiffness(m, id, Vector::Zero(3));
    const Vector rs = A * Vector::Ones(3);
    CHECK(rs.lpNorm<Eigen::Infinity>() < 1e-14);

    // Anisotropic hand assembly: grads eta0 = (-1,-1), eta1 = (1,0), eta2 = (0,1).
    const double c = 0.25;
    const SparseMatrix Ac =
        assemble_linearized_stiffness(m, make_anisotropic(c), Vector::Zero(3));
    const Eigen::MatrixXd D = Eigen::MatrixXd(Ac);
    CHECK(D(0, 0) == Catch::Approx(0.5 * (c + 1.0)).epsilon(1e-14));
    CHECK(D(0, 1) == Catch::Approx(-0.5 * c).epsilon(1e-14));
    CHECK(D(0, 2) == Catch::Approx(-0.5).epsilon(1e-14));
    CHECK(D(1, 1) == Catch::Approx(0.5 * c).epsilon(1e-14));
    CHECK(D(2, 2) == Catch::Approx(0.5).epsilon(1e-14));

    // Nonlinear model at U = 0: Jacobian is g(0) Id = 3 Id.
    const SparseMatrix An =
        assemble_linearized_stiffness(m, make_benchmark_nonlinear(), Vector::Zero(3));
    const Eigen::MatrixXd Dn = Eigen::MatrixXd(An);
    const Eigen::MatrixXd Di = Eigen::MatrixXd(A);
    CHECK((Dn - 3.0 * Di).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("assemble_load basics", "[fem]") {
    const Mesh m = single_triangle({0, 0}, {1, 0}, {0, 1});

    VolumeData zero;
    CHECK(assemble_load(m, zero).lpNorm<Eigen::Infinity>() == 0.0);

    VolumeData one;
    one.f = [](const Vec2&) { return 1.0; };
    const Vector l1 = assemble_load(m, one);
    for (int i = 0; i < 3; ++i) CHECK(l1[i] == Catch::Approx(0.5 / 3.0).epsilon(1e-14));

    // f = x against the hats: exact moments 1/24, 1/12, 1/24.
    VolumeData fx;
    fx.f = [](const Vec2& p) { return p.x; };
    const Vector lx = assemble_load(m, fx);
    CHECK(lx[0] == Catch::Approx(1.0 / 24.0).margin(1e-14));
    CHECK(lx[1] == Catch::Approx(1.0 / 12.0).margin(1e-14));
    CHECK(lx[2] == Catch::Approx(1.0 / 24.0).margin(1e-14));

    // Constant phi0 pairs each boundary hat with half the incident lengths.
    VolumeData bd;
    bd.phi0 = [](const Vec2&, const Vec2&) { return 1.0; };
    const Vector lb = assemble_load(m, bd);
    double perim = 0.0;
    for (std::size_t e = 0; e < m.boundary_edges.size(); ++e)
        perim += m.boundary_edge_length(static_cast<int>(e));
    CHECK(lb.sum() == Catch::Approx(perim).epsilon(1e-13));
}

TEST_CASE("H1 error: affine reproduction and singular-solution oracle", "[fem]") {
    const Mesh m = refine_uniform(build_initial(Domain::LShape), 1);
    auto u = [](const Vec2& p) { return 0.75 * p.x - 1.5 * p.y + 0.25; };
    auto gu = [](const Vec2&) { return Vec2{0.75, -1.5}; };
    Vector U(m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i) U[i] = u(m.vertices[i]);
    CHECK(h1_seminorm_error(m, U, gu) < 1e-14);
    CHECK(l2_error(m, U, u) < 1e-14);
    CHECK(h1_error(m, U, u, gu) < 1e-14);

    // Quadratic u = x^2 - y^2: the error integrand is polynomial, so the
    // fixed-order rule and the subdivision oracle must agree to roundoff.
    {
        auto uq = [](const Vec2& p) { return p.x * p.x - p.y * p.y; };
        auto gq = [](const Vec2& p) { return Vec2{2.0 * p.x, -2.0 * p.y}; };
        Vector Uq(m.vertices.size());
        for (std::size_t i = 0; i < m.vertices.size(); ++i) Uq[i] = uq(m.vertices[i]);
        double oracle_sq = 0.0;
        for (std::size_t t = 0; t < m.triangles.size(); ++t) {
            const Triangle& T = m.triangles[t];
            const Vec2 gU = p1_gradient_of(m, static_cast<int>(t), Uq);
            oracle_sq += adaptdetail::integrate_triangle_refined(
                m.vertices[T.v[0]], m.vertices[T.v[1]], m.vertices[T.v[2]],
                [&](const Vec2& x) { return norm2(gq(x) - gU); }, 2);
        }
        CHECK(h1_seminorm_error(m, Uq, gq) ==
              Catch::Approx(std::sqrt(oracle_sq)).epsilon(1e-13));
    }

    // Corner-singular u = r^{2/3} sin(2 phi/3): compare the fixed-order
    // quadrature against a corner-graded oracle.
    const double a = 2.0 / 3.0;
    const double cut = -M_PI / 4.0;
    auto gs = [&](const Vec2& p) { return benchdetail::corner_gradient(p, a, cut); };
    Vector Us(m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        Us[i] = benchdetail::corner_value(m.vertices[i], a, cut);
    const double err = h1_seminorm_error(m, Us, gs);

    double oracle_sq = 0.0;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        const Triangle& T = m.triangles[t];
        const std::array<Vec2, 3> p = {m.vertices[T.v[0]], m.vertices[T.v[1]],
                                       m.vertices[T.v[2]]};
        const Vec2 gU = p1_gradient_of(m, static_cast<int>(t), Us);
        auto f = [&](const Vec2& x) { return norm2(gs(x) - gU); };
        int corner = -1;
        for (int i = 0; i < 3; ++i)
            if (norm(p[i]) < 1e-14) corner = i;
        if (corner >= 0)
            oracle_sq += adaptdetail::integrate_triangle_corner(p[corner], p[(corner + 1) % 3],
                                                                p[(corner + 2) % 3], f);
        else
            oracle_sq += adaptdetail::integrate_triangle_refined(p[0], p[1], p[2], f, 4);
    }
    // The library uses a fixed-order rule per triangle, which under-resolves
    // the r^{-2/3} gradient spike on the two corner triangles of this coarse
    // mesh; a few percent agreement is the expected behavior here.
    CHECK(err == Catch::Approx(std::sqrt(oracle_sq)).epsilon(0.05));
}

TEST_CASE("linearization is consistent with the nonlinear form", "[fem]") {
    const Mesh m = refine_uniform(build_initial(Domain::ZShape), 1);
    const CoefficientModel nl = make_benchmark_nonlinear();
    std::mt19937 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    Vector U(m.vertices.size()), d(m.vertices.size());
    for (int i = 0; i < U.size(); ++i) {
        U[i] = g(rng);
        d[i] = g(rng);
    }
    const SparseMatrix J = assemble_linearized_stiffness(m, nl, U);
    const double eps = 1e-6;
    const Vector fd =
        (apply_nonlinear_form(m, nl, U + eps * d) - apply_nonlinear_form(m, nl, U - eps * d)) /
        (2.0 * eps);
    const Vector jd = J * d;
    CHECK((fd - jd).lpNorm<Eigen::Infinity>() <= 1e-5 * (1.0 + jd.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("discrete monotonicity of the nonlinear form", "[fem]") {
    const Mesh m = refine_uniform(build_initial(Domain::ZShape), 1);
    const CoefficientModel nl = make_benchmark_nonlinear();
    std::mt19937 rng(77);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Vector U(m.vertices.size()), V(m.vertices.size());
        for (int i = 0; i < U.size(); ++i) {
            U[i] = g(rng);
            V[i] = g(rng);
        }
        const double lhs =
            (apply_nonlinear_form(m, nl, U) - apply_nonlinear_form(m, nl, V)).dot(U - V);
        const double rhs = nl.c_ell * p1_h1_seminorm_sq(m, Vector(U - V));
        CHECK(lhs >= rhs - 1e-10 * std::max(1.0, rhs));
    }
}
