#pragma once

#include "capcon/error.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

namespace capcon {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Structured triangulation of the unit square. Every cell is split along its
/// bottom-left to top-right diagonal; triangles are counterclockwise.
struct Mesh2D {
    std::size_t n = 0;
    std::vector<Point> vertices;
    std::vector<std::array<std::size_t, 3>> triangles;
    std::vector<std::size_t> boundary_vertices;
    std::vector<bool> on_boundary;
    double h = 0.0;

    std::size_t vertex(std::size_t i, std::size_t j) const { return j * (n + 1) + i; }
    std::size_t lattice_i(std::size_t v) const { return v % (n + 1); }
    std::size_t lattice_j(std::size_t v) const { return v / (n + 1); }

    double signed_area(std::size_t t) const
    {
        const auto& T = triangles[t];
        const Point& a = vertices[T[0]];
        const Point& b = vertices[T[1]];
        const Point& c = vertices[T[2]];
        return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
    }

    /// True if (a, b) is an edge of some triangle.
    bool is_edge(std::size_t a, std::size_t b) const
    {
        const long ia = static_cast<long>(lattice_i(a)), ja = static_cast<long>(lattice_j(a));
        const long ib = static_cast<long>(lattice_i(b)), jb = static_cast<long>(lattice_j(b));
        const long di = ib - ia, dj = jb - ja;
        if (std::labs(di) + std::labs(dj) == 1)
            return true;
        return (di == 1 && dj == 1) || (di == -1 && dj == -1);
    }
};

inline Mesh2D build_unit_square_mesh(std::size_t n)
{
    if (n < 2)
        throw InvalidArgument("unit square mesh needs at least 2 cells per side");
    Mesh2D m;
    m.n = n;
    const double hn = 1.0 / static_cast<double>(n);
    m.vertices.reserve((n + 1) * (n + 1));
    m.on_boundary.assign((n + 1) * (n + 1), false);
    for (std::size_t j = 0; j <= n; ++j)
        for (std::size_t i = 0; i <= n; ++i) {
            m.vertices.push_back({static_cast<double>(i) * hn, static_cast<double>(j) * hn});
            if (i == 0 || j == 0 || i == n || j == n) {
                m.boundary_vertices.push_back(m.vertex(i, j));
                m.on_boundary[m.vertex(i, j)] = true;
            }
        }
    m.triangles.reserve(2 * n * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t v00 = m.vertex(i, j), v10 = m.vertex(i + 1, j);
            const std::size_t v01 = m.vertex(i, j + 1), v11 = m.vertex(i + 1, j + 1);
            m.triangles.push_back({v00, v10, v11});
            m.triangles.push_back({v00, v11, v01});
        }
    m.h = std::sqrt(2.0) * hn;
    return m;
}

/// Ordered chain of mesh edges.
struct GammaEmbedding {
    std::vector<std::size_t> gamma_vertices;
    std::vector<std::array<std::size_t, 2>> gamma_edges;
    bool endpoints_on_boundary = false;

    /// Edge lengths, in chain order.
    std::vector<double> edge_lengths(const Mesh2D& mesh) const
    {
        std::vector<double> len;
        len.reserve(gamma_edges.size());
        for (const auto& e : gamma_edges) {
            const Point& a = mesh.vertices[e[0]];
            const Point& b = mesh.vertices[e[1]];
            len.push_back(std::hypot(b.x - a.x, b.y - a.y));
        }
        return len;
    }
};

namespace detail {

inline std::size_t snap_to_vertex(const Mesh2D& mesh, const Point& p)
{
    const double fn = static_cast<double>(mesh.n);
    const double fi = p.x * fn, fj = p.y * fn;
    const double ri = std::round(fi), rj = std::round(fj);
    if (std::abs(fi - ri) > 1e-9 || std::abs(fj - rj) > 1e-9 || ri < 0 || rj < 0 || ri > fn || rj > fn)
        throw NotEdgeAligned("polyline point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                             ") is not a mesh vertex");
    return mesh.vertex(static_cast<std::size_t>(ri), static_cast<std::size_t>(rj));
}

} // namespace detail

/// Resolves a polyline of lattice points into a chain of mesh edges. Each segment
/// must run along grid lines or along the cell diagonals.
inline GammaEmbedding embed_gamma(const Mesh2D& mesh, const std::vector<Point>& polyline)
{
    if (polyline.size() < 2)
        throw InvalidArgument("polyline needs at least two points");
    GammaEmbedding g;
    std::vector<bool> used(mesh.vertices.size(), false);
    auto push = [&](std::size_t v) {
        if (used[v])
            throw NotEdgeAligned("polyline revisits a vertex");
        used[v] = true;
        if (!g.gamma_vertices.empty())
            g.gamma_edges.push_back({g.gamma_vertices.back(), v});
        g.gamma_vertices.push_back(v);
    };
    std::size_t cur = detail::snap_to_vertex(mesh, polyline.front());
    push(cur);
    for (std::size_t k = 1; k < polyline.size(); ++k) {
        const std::size_t target = detail::snap_to_vertex(mesh, polyline[k]);
        const long di = static_cast<long>(mesh.lattice_i(target)) - static_cast<long>(mesh.lattice_i(cur));
        const long dj = static_cast<long>(mesh.lattice_j(target)) - static_cast<long>(mesh.lattice_j(cur));
        if (di == 0 && dj == 0)
            continue;
        if (di != 0 && dj != 0 && std::labs(di) != std::labs(dj))
            throw NotEdgeAligned("polyline segment is not along mesh edges");
        const long si = (di > 0) - (di < 0), sj = (dj > 0) - (dj < 0);
        const long steps = std::max(std::labs(di), std::labs(dj));
        for (long s = 0; s < steps; ++s) {
            const std::size_t next = mesh.vertex(static_cast<std::size_t>(static_cast<long>(mesh.lattice_i(cur)) + si),
                                                 static_cast<std::size_t>(static_cast<long>(mesh.lattice_j(cur)) + sj));
            if (!mesh.is_edge(cur, next))
                throw NotEdgeAligned("polyline segment crosses a cell instead of following an edge");
            push(next);
            cur = next;
        }
    }
    g.endpoints_on_boundary =
        mesh.on_boundary[g.gamma_vertices.front()] && mesh.on_boundary[g.gamma_vertices.back()];
    return g;
}

/// Geometry (a): the vertical midline x = 1/2. Needs an even cell count.
inline GammaEmbedding embed_midline(const Mesh2D& mesh)
{
    if (mesh.n % 2 != 0)
        throw InvalidArgument("midline geometry needs an even number of cells per side");
    return embed_gamma(mesh, {{0.5, 0.0}, {0.5, 1.0}});
}

/// Left edge x = 0, used for the boundary multiplier problem.
inline GammaEmbedding embed_left_edge(const Mesh2D& mesh) { return embed_gamma(mesh, {{0.0, 0.0}, {0.0, 1.0}}); }

enum class SpaceTag { U, V, Q, U_full };

struct DofMap {
    static constexpr std::size_t none = static_cast<std::size_t>(-1);

    SpaceTag space_tag = SpaceTag::U;
    /// Mesh vertex index to dof index, or `none`.
    std::vector<std::size_t> global_to_dof;
    /// Dof index to mesh vertex index.
    std::vector<std::size_t> dof_to_global;
    std::size_t n_dofs = 0;

    std::size_t dof(std::size_t vertex) const { return global_to_dof[vertex]; }
};

enum class BoundaryConditions {
    /// U ⊂ H¹₀(Ω), V = Q ⊂ H¹₀(Γ).
    Coupled,
    /// U ⊂ H¹(Ω), multiplier space on all of Γ.
    Babuska
};

struct DofMaps {
    DofMap U;
    DofMap V;
    DofMap Q;
};

inline DofMaps build_dof_maps(const Mesh2D& mesh, const GammaEmbedding& gamma, BoundaryConditions bc)
{
    const std::size_t nv = mesh.vertices.size();
    DofMaps maps;
    maps.U.space_tag = bc == BoundaryConditions::Coupled ? SpaceTag::U : SpaceTag::U_full;
    maps.U.global_to_dof.assign(nv, DofMap::none);
    for (std::size_t v = 0; v < nv; ++v)
        if (bc == BoundaryConditions::Babuska || !mesh.on_boundary[v]) {
            maps.U.global_to_dof[v] = maps.U.n_dofs++;
            maps.U.dof_to_global.push_back(v);
        }

    maps.Q.space_tag = SpaceTag::Q;
    maps.Q.global_to_dof.assign(nv, DofMap::none);
    const std::size_t ng = gamma.gamma_vertices.size();
    for (std::size_t k = 0; k < ng; ++k) {
        const bool endpoint = k == 0 || k + 1 == ng;
        if (bc == BoundaryConditions::Coupled && endpoint)
            continue;
        const std::size_t v = gamma.gamma_vertices[k];
        maps.Q.global_to_dof[v] = maps.Q.n_dofs++;
        maps.Q.dof_to_global.push_back(v);
    }

    if (bc == BoundaryConditions::Coupled) {
        maps.V = maps.Q;
        maps.V.space_tag = SpaceTag::V;
    } else {
        maps.V.space_tag = SpaceTag::V;
        maps.V.global_to_dof.assign(nv, DofMap::none);
    }
    return maps;
}

/// Plain-text dump: vertex list, triangle list, Γ vertex list.
inline void write_mesh(std::ostream& os, const Mesh2D& mesh, const GammaEmbedding* gamma = nullptr)
{
    os << "vertices " << mesh.vertices.size() << "\n";
    for (const Point& p : mesh.vertices)
        os << p.x << " " << p.y << "\n";
    os << "triangles " << mesh.triangles.size() << "\n";
    for (const auto& t : mesh.triangles)
        os << t[0] << " " << t[1] << " " << t[2] << "\n";
    if (gamma) {
        os << "gamma " << gamma->gamma_vertices.size() << "\n";
        for (std::size_t v : gamma->gamma_vertices)
            os << v << "\n";
    }
}

} // namespace capcon
