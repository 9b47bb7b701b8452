#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "fembem/geometry.hpp"

namespace fembem {

enum class Domain { LShape, ZShape };

struct Triangle {
    std::array<int, 3> v{};   // vertex indices, counterclockwise
    int ref_edge = 0;         // local edge chosen for bisection, edge i = (v[i], v[(i+1)%3])
    int generation = 0;
};

struct BoundaryEdge {
    int a = 0;                // oriented so that the domain lies left of a -> b
    int b = 0;
    int tri = 0;              // owning triangle
    Vec2 nu;                  // outward unit normal
};

struct InteriorEdge {
    int a = 0;
    int b = 0;
    int tri_plus = 0;
    int tri_minus = 0;
};

struct MarkSet {
    std::vector<int> triangles;
    std::vector<int> boundary_edges;

    bool empty() const { return triangles.empty() && boundary_edges.empty(); }
};

class Mesh {
public:
    std::vector<Vec2> vertices;
    std::vector<Triangle> triangles;
    std::vector<InteriorEdge> interior_edges;
    std::vector<BoundaryEdge> boundary_edges;

    // For vertex i of this mesh, the pair of vertex indices of the previous
    // mesh whose midpoint it is; {i,i} for inherited vertices. Level 0
    // meshes carry {i,i} for all vertices.
    std::vector<std::array<int, 2>> vertex_parents;

    int level = 0;
    Domain domain = Domain::LShape;
    bool noop_refine = false; // set when refine_nvb received an empty mark set

    double area(int t) const {
        const Triangle& T = triangles[t];
        return signed_area(vertices[T.v[0]], vertices[T.v[1]], vertices[T.v[2]]);
    }

    double total_area() const {
        double s = 0.0;
        for (std::size_t t = 0; t < triangles.size(); ++t) s += area(static_cast<int>(t));
        return s;
    }

    double edge_length(int a, int b) const { return norm(vertices[b] - vertices[a]); }

    double boundary_edge_length(int e) const {
        return edge_length(boundary_edges[e].a, boundary_edges[e].b);
    }

    double diam(int t) const {
        const Triangle& T = triangles[t];
        double d = 0.0;
        for (int i = 0; i < 3; ++i)
            d = std::max(d, edge_length(T.v[i], T.v[(i + 1) % 3]));
        return d;
    }

    /// Indices of vertices lying on the boundary, sorted ascending.
    std::vector<int> boundary_vertices() const {
        std::vector<char> on(vertices.size(), 0);
        for (const BoundaryEdge& e : boundary_edges) { on[e.a] = 1; on[e.b] = 1; }
        std::vector<int> out;
        for (std::size_t i = 0; i < vertices.size(); ++i)
            if (on[i]) out.push_back(static_cast<int>(i));
        return out;
    }
};

namespace detail {

inline std::pair<int, int> sorted_pair(int a, int b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

// Rotate vertex order so that the refinement edge becomes edge 0, then
// rebuild edge connectivity. Also used to normalize freshly built meshes.
inline void normalize_ref_edges(std::vector<Triangle>& tris) {
    for (Triangle& T : tris) {
        int r = T.ref_edge;
        if (r != 0) {
            std::array<int, 3> w = T.v;
            for (int i = 0; i < 3; ++i) T.v[i] = w[(r + i) % 3];
            T.ref_edge = 0;
        }
    }
}

inline void build_edges(Mesh& m) {
    m.interior_edges.clear();
    m.boundary_edges.clear();
    // Directed edge -> triangle index.
    std::map<std::pair<int, int>, int> directed;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        const Triangle& T = m.triangles[t];
        for (int i = 0; i < 3; ++i) {
            auto key = std::make_pair(T.v[i], T.v[(i + 1) % 3]);
            if (!directed.emplace(key, static_cast<int>(t)).second)
                throw std::runtime_error("mesh: duplicate directed edge (orientation broken)");
        }
    }
    for (const auto& [key, t] : directed) {
        auto rev = directed.find(std::make_pair(key.second, key.first));
        if (rev == directed.end()) {
            BoundaryEdge e;
            e.a = key.first;
            e.b = key.second;
            e.tri = t;
            Vec2 d = m.vertices[e.b] - m.vertices[e.a];
            double len = norm(d);
            if (len <= 0.0) throw std::runtime_error("mesh: degenerate boundary edge");
            e.nu = Vec2(d.y / len, -d.x / len);
            m.boundary_edges.push_back(e);
        } else if (key.first < key.second) {
            InteriorEdge e;
            e.a = key.first;
            e.b = key.second;
            e.tri_plus = t;
            e.tri_minus = rev->second;
            m.interior_edges.push_back(e);
        }
    }
}

// Refinement edge = longest edge, ties by lowest sorted vertex-index pair.
inline void init_ref_edges_longest(Mesh& m) {
    for (Triangle& T : m.triangles) {
        int best = 0;
        double best_len = -1.0;
        std::pair<int, int> best_key{0, 0};
        for (int i = 0; i < 3; ++i) {
            double len = m.edge_length(T.v[i], T.v[(i + 1) % 3]);
            auto key = sorted_pair(T.v[i], T.v[(i + 1) % 3]);
            if (len > best_len + 1e-14 ||
                (std::abs(len - best_len) <= 1e-14 && key < best_key)) {
                best = i;
                best_len = len;
                best_key = key;
            }
        }
        T.ref_edge = best;
    }
    normalize_ref_edges(m.triangles);
}

} // namespace detail

/// Initial triangulation of the benchmark domain, scaled so diam(Omega) < 1,
/// reentrant corner at the origin.
inline Mesh build_initial(Domain domain) {
    Mesh m;
    m.domain = domain;
    m.level = 0;
    const double c = 0.25;
    if (domain == Domain::LShape) {
        // (-1/4,1/4)^2 minus the quadrant [0,1/4] x [-1/4,0].
        m.vertices = {
            {0, 0},   {c, 0},  {c, c},  {0, c},  {-c, c},
            {-c, 0},  {-c, -c}, {0, -c},
            {c / 2, c / 2}, {-c / 2, c / 2}, {-c / 2, -c / 2}};
        const int sq[3][4] = {{0, 1, 2, 3}, {0, 3, 4, 5}, {6, 7, 0, 5}};
        const int ctr[3] = {8, 9, 10};
        for (int s = 0; s < 3; ++s)
            for (int i = 0; i < 4; ++i)
                m.triangles.push_back({{sq[s][i], sq[s][(i + 1) % 4], ctr[s]}, 0, 0});
    } else {
        // (-1/4,1/4)^2 minus the wedge between the positive x-axis and the
        // direction (1,-1); interior angle 7*pi/4 at the origin.
        m.vertices = {
            {0, 0},   {c, 0},  {c, c},  {0, c},  {-c, c},
            {-c, 0},  {-c, -c}, {0, -c}, {c, -c},
            {c / 2, -c / 2},
            {c / 2, c / 2}, {-c / 2, c / 2}, {-c / 2, -c / 2}};
        const int sq[3][4] = {{0, 1, 2, 3}, {0, 3, 4, 5}, {6, 7, 0, 5}};
        const int ctr[3] = {10, 11, 12};
        for (int s = 0; s < 3; ++s)
            for (int i = 0; i < 4; ++i)
                m.triangles.push_back({{sq[s][i], sq[s][(i + 1) % 4], ctr[s]}, 0, 0});
        m.triangles.push_back({{0, 7, 9}, 0, 0});
        m.triangles.push_back({{7, 8, 9}, 0, 0});
    }
    m.vertex_parents.resize(m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        m.vertex_parents[i] = {static_cast<int>(i), static_cast<int>(i)};
    detail::init_ref_edges_longest(m);
    detail::build_edges(m);
    return m;
}

/// Local mesh width: |T|^{1/2} for triangles.
inline double mesh_size_triangle(const Mesh& m, int t) { return std::sqrt(m.area(t)); }

/// Local mesh width: |E| for (interior or boundary) edges.
inline double mesh_size_edge(const Mesh& m, int a, int b) { return m.edge_length(a, b); }

inline double h_max(const Mesh& m) {
    double h = 0.0;
    for (std::size_t t = 0; t < m.triangles.size(); ++t)
        h = std::max(h, mesh_size_triangle(m, static_cast<int>(t)));
    return h;
}

/// sigma(T) = max over triangles of diam(T)^2 / |T|.
inline double shape_regularity(const Mesh& m) {
    double s = 0.0;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        double d = m.diam(static_cast<int>(t));
        s = std::max(s, d * d / m.area(static_cast<int>(t)));
    }
    return s;
}

/// Newest-vertex bisection with conforming closure. Every marked triangle is
/// bisected at least once; marked boundary edges mark the corresponding edge
/// of their owning triangle. An empty mark set returns the input mesh with
/// the noop_refine flag set.
inline Mesh refine_nvb(const Mesh& m, const MarkSet& marks) {
    for (int t : marks.triangles)
        if (t < 0 || t >= static_cast<int>(m.triangles.size()))
            throw std::out_of_range("refine_nvb: triangle index out of range");
    for (int e : marks.boundary_edges)
        if (e < 0 || e >= static_cast<int>(m.boundary_edges.size()))
            throw std::out_of_range("refine_nvb: boundary edge index out of range");

    if (marks.empty()) {
        Mesh out = m;
        out.noop_refine = true;
        return out;
    }

    std::map<std::pair<int, int>, int> marked; // edge -> new vertex index (filled later)
    auto mark_edge = [&](int a, int b) { marked.emplace(detail::sorted_pair(a, b), -1); };

    for (int t : marks.triangles) {
        const Triangle& T = m.triangles[t];
        mark_edge(T.v[0], T.v[1]); // refinement edge (normalized to edge 0)
    }
    for (int e : marks.boundary_edges)
        mark_edge(m.boundary_edges[e].a, m.boundary_edges[e].b);

    // Closure: whenever any edge of a triangle is marked, its refinement
    // edge must be marked as well.
    bool changed = true;
    while (changed) {
        changed = false;
        for (const Triangle& T : m.triangles) {
            bool any = false;
            for (int i = 0; i < 3; ++i)
                any = any || marked.count(detail::sorted_pair(T.v[i], T.v[(i + 1) % 3])) > 0;
            if (any && !marked.count(detail::sorted_pair(T.v[0], T.v[1]))) {
                mark_edge(T.v[0], T.v[1]);
                changed = true;
            }
        }
    }

    Mesh out;
    out.domain = m.domain;
    out.level = m.level + 1;
    out.vertices = m.vertices;
    out.vertex_parents.resize(m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        out.vertex_parents[i] = {static_cast<int>(i), static_cast<int>(i)};
    for (auto& [key, idx] : marked) { // std::map iterates in sorted order -> deterministic
        idx = static_cast<int>(out.vertices.size());
        out.vertices.push_back(midpoint(m.vertices[key.first], m.vertices[key.second]));
        out.vertex_parents.push_back({key.first, key.second});
    }

    auto midpoint_of = [&](int a, int b) -> int {
        auto it = marked.find(detail::sorted_pair(a, b));
        return it == marked.end() ? -1 : it->second;
    };

    for (const Triangle& T : m.triangles) {
        const int t0 = T.v[0], t1 = T.v[1], t2 = T.v[2];
        const int m01 = midpoint_of(t0, t1);
        const int m12 = midpoint_of(t1, t2);
        const int m20 = midpoint_of(t2, t0);
        if (m01 < 0) {
            out.triangles.push_back(T);
            continue;
        }
        const int g1 = T.generation + 1, g2 = T.generation + 2;
        // First bisection: sons (t2,t0,m01) and (t1,t2,m01), refinement
        // edges (t2,t0) and (t1,t2).
        if (m20 < 0) {
            out.triangles.push_back({{t2, t0, m01}, 0, g1});
        } else {
            out.triangles.push_back({{m01, t2, m20}, 0, g2});
            out.triangles.push_back({{t0, m01, m20}, 0, g2});
        }
        if (m12 < 0) {
            out.triangles.push_back({{t1, t2, m01}, 0, g1});
        } else {
            out.triangles.push_back({{m01, t1, m12}, 0, g2});
            out.triangles.push_back({{t2, m01, m12}, 0, g2});
        }
    }

    detail::build_edges(out);
    return out;
}

/// Apply k sweeps of uniform refinement (mark every triangle).
inline Mesh refine_uniform(Mesh m, int sweeps = 1) {
    for (int k = 0; k < sweeps; ++k) {
        MarkSet all;
        all.triangles.resize(m.triangles.size());
        for (std::size_t t = 0; t < m.triangles.size(); ++t)
            all.triangles[t] = static_cast<int>(t);
        m = refine_nvb(m, all);
    }
    return m;
}

/// For each boundary edge of `fine`, the index of the boundary edge of
/// `coarse` that contains it. Requires `fine` to descend from `coarse`.
inline std::vector<int> map_boundary_edges(const Mesh& coarse, const Mesh& fine) {
    std::vector<int> parent(fine.boundary_edges.size(), -1);
    for (std::size_t j = 0; j < fine.boundary_edges.size(); ++j) {
        Vec2 mid = midpoint(fine.vertices[fine.boundary_edges[j].a],
                            fine.vertices[fine.boundary_edges[j].b]);
        double best = 1e300;
        for (std::size_t i = 0; i < coarse.boundary_edges.size(); ++i) {
            const Vec2 a = coarse.vertices[coarse.boundary_edges[i].a];
            const Vec2 b = coarse.vertices[coarse.boundary_edges[i].b];
            const Vec2 d = b - a;
            double len2 = norm2(d);
            double s = std::clamp(dot(mid - a, d) / len2, 0.0, 1.0);
            double dist = norm(mid - (a + s * d));
            if (dist < best) {
                best = dist;
                parent[j] = static_cast<int>(i);
            }
        }
        if (best > 1e-12)
            throw std::runtime_error("map_boundary_edges: fine edge not contained in coarse boundary");
    }
    return parent;
}

/// Conformity and orientation checks; throws on violation (test helper).
inline void check_mesh(const Mesh& m) {
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        if (m.area(static_cast<int>(t)) <= 0.0)
            throw std::runtime_error("check_mesh: non-positive triangle area");
        if (m.triangles[t].ref_edge < 0 || m.triangles[t].ref_edge > 2)
            throw std::runtime_error("check_mesh: refinement edge index out of range");
    }
    // build_edges already throws on duplicate directed edges; recount here.
    std::map<std::pair<int, int>, int> count;
    for (const Triangle& T : m.triangles)
        for (int i = 0; i < 3; ++i)
            count[detail::sorted_pair(T.v[i], T.v[(i + 1) % 3])]++;
    std::size_t n_bnd = 0, n_int = 0;
    for (const auto& [key, c] : count) {
        if (c == 1) n_bnd++;
        else if (c == 2) n_int++;
        else throw std::runtime_error("check_mesh: edge shared by more than two triangles");
    }
    if (n_bnd != m.boundary_edges.size() || n_int != m.interior_edges.size())
        throw std::runtime_error("check_mesh: edge lists inconsistent");
    for (const BoundaryEdge& e : m.boundary_edges) {
        if (std::abs(norm(e.nu) - 1.0) > 1e-14)
            throw std::runtime_error("check_mesh: boundary normal not unit");
        Vec2 d = m.vertices[e.b] - m.vertices[e.a];
        if (std::abs(dot(d, e.nu)) > 1e-14 * norm(d))
            throw std::runtime_error("check_mesh: boundary normal not perpendicular");
    }
}

/// Plain-text dump: VERTICES / TRIANGLES / BOUNDARY blocks, 0-based indices.
inline void dump_mesh(const Mesh& m, std::ostream& os) {
    os.precision(17);
    os << "VERTICES " << m.vertices.size() << "\n";
    for (const Vec2& v : m.vertices) os << v.x << " " << v.y << "\n";
    os << "TRIANGLES " << m.triangles.size() << "\n";
    for (const Triangle& T : m.triangles)
        os << T.v[0] << " " << T.v[1] << " " << T.v[2] << " "
           << T.ref_edge << " " << T.generation << "\n";
    os << "BOUNDARY " << m.boundary_edges.size() << "\n";
    for (const BoundaryEdge& e : m.boundary_edges)
        os << e.a << " " << e.b << " " << e.tri << "\n";
}

} // namespace fembem
