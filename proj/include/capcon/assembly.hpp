#pragma once

#include "capcon/mesh.hpp"
#include "capcon/sparse.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

namespace capcon {

using ScalarField = std::function<double(double x, double y)>;

namespace detail {

struct ElementGeometry {
    double area;
    // Gradients of the three barycentric hat functions.
    std::array<std::array<double, 2>, 3> grad;
};

inline ElementGeometry element_geometry(const Mesh2D& mesh, std::size_t t)
{
    const auto& T = mesh.triangles[t];
    const Point& a = mesh.vertices[T[0]];
    const Point& b = mesh.vertices[T[1]];
    const Point& c = mesh.vertices[T[2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    ElementGeometry g;
    g.area = 0.5 * std::abs(det);
    g.grad[0] = {(b.y - c.y) / det, (c.x - b.x) / det};
    g.grad[1] = {(c.y - a.y) / det, (a.x - c.x) / det};
    g.grad[2] = {(a.y - b.y) / det, (b.x - a.x) / det};
    return g;
}

} // namespace detail

/// (∇φ_j, ∇φ_i)_Ω on the retained dofs of `dofs`.
inline SparseMatrix assemble_stiffness_2d(const Mesh2D& mesh, const DofMap& dofs)
{
    TripletBuilder t(dofs.n_dofs, dofs.n_dofs);
    for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
        const auto g = detail::element_geometry(mesh, e);
        const auto& T = mesh.triangles[e];
        for (int a = 0; a < 3; ++a) {
            const std::size_t ia = dofs.dof(T[a]);
            if (ia == DofMap::none)
                continue;
            for (int b = 0; b < 3; ++b) {
                const std::size_t ib = dofs.dof(T[b]);
                if (ib == DofMap::none)
                    continue;
                t.add(ia, ib, g.area * (g.grad[a][0] * g.grad[b][0] + g.grad[a][1] * g.grad[b][1]));
            }
        }
    }
    return t.finalize(true);
}

/// (φ_j, φ_i)_Ω
inline SparseMatrix assemble_mass_2d(const Mesh2D& mesh, const DofMap& dofs)
{
    TripletBuilder t(dofs.n_dofs, dofs.n_dofs);
    for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
        const double area = detail::element_geometry(mesh, e).area;
        const auto& T = mesh.triangles[e];
        for (int a = 0; a < 3; ++a) {
            const std::size_t ia = dofs.dof(T[a]);
            if (ia == DofMap::none)
                continue;
            for (int b = 0; b < 3; ++b) {
                const std::size_t ib = dofs.dof(T[b]);
                if (ib == DofMap::none)
                    continue;
                t.add(ia, ib, area * (a == b ? 2.0 : 1.0) / 12.0);
            }
        }
    }
    return t.finalize(true);
}

namespace detail {

template <class Local>
SparseMatrix assemble_1d(const Mesh2D& mesh, const GammaEmbedding& gamma, const DofMap& dofs, Local local)
{
    TripletBuilder t(dofs.n_dofs, dofs.n_dofs);
    const auto len = gamma.edge_lengths(mesh);
    for (std::size_t e = 0; e < gamma.gamma_edges.size(); ++e) {
        const std::array<std::size_t, 2> d{dofs.dof(gamma.gamma_edges[e][0]), dofs.dof(gamma.gamma_edges[e][1])};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                if (d[a] != DofMap::none && d[b] != DofMap::none)
                    t.add(d[a], d[b], local(len[e], a == b));
    }
    return t.finalize(true);
}

} // namespace detail

/// (ψ_j', ψ_i')_Γ with stencil (−1/h, 2/h, −1/h) on uniform chains.
inline SparseMatrix assemble_stiffness_1d(const Mesh2D& mesh, const GammaEmbedding& gamma, const DofMap& dofs)
{
    return detail::assemble_1d(mesh, gamma, dofs, [](double h, bool diag) { return (diag ? 1.0 : -1.0) / h; });
}

/// (χ_j, χ_i)_Γ with stencil (h/6, 4h/6, h/6) on uniform chains.
inline SparseMatrix assemble_mass_1d(const Mesh2D& mesh, const GammaEmbedding& gamma, const DofMap& dofs)
{
    return detail::assemble_1d(mesh, gamma, dofs, [](double h, bool diag) { return h * (diag ? 2.0 : 1.0) / 6.0; });
}

/// T[i, j] = 1 when Ω-dof j sits at the vertex of Γ-dof i.
inline SparseMatrix assemble_trace_matrix(const DofMap& dofs_U, const DofMap& dofs_Q)
{
    TripletBuilder t(dofs_Q.n_dofs, dofs_U.n_dofs);
    for (std::size_t i = 0; i < dofs_Q.n_dofs; ++i) {
        const std::size_t j = dofs_U.dof(dofs_Q.dof_to_global[i]);
        if (j != DofMap::none)
            t.add(i, j, 1.0);
    }
    return t.finalize();
}

/// ε ∫_Γ p Tφ_i contribution to an Ω load vector.
struct GammaTerm {
    const GammaEmbedding* gamma = nullptr;
    ScalarField p;
    double eps = 1.0;
};

namespace detail {

// Two-point Gauss rule on each Γ segment; calls add(vertex, weight * value * hat).
template <class Add>
void gamma_load(const Mesh2D& mesh, const GammaEmbedding& gamma, const ScalarField& g, Add add)
{
    const double xi = 0.5 / std::sqrt(3.0);
    const auto len = gamma.edge_lengths(mesh);
    for (std::size_t e = 0; e < gamma.gamma_edges.size(); ++e) {
        const Point& a = mesh.vertices[gamma.gamma_edges[e][0]];
        const Point& b = mesh.vertices[gamma.gamma_edges[e][1]];
        for (double s : {0.5 - xi, 0.5 + xi}) {
            const double val = 0.5 * len[e] * g(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y));
            add(gamma.gamma_edges[e][0], val * (1.0 - s));
            add(gamma.gamma_edges[e][1], val * s);
        }
    }
}

} // namespace detail

/// b_i = ∫_Ω f φ_i (edge-midpoint rule, exact for quadratics), plus the optional Γ term.
inline Vector assemble_load(const Mesh2D& mesh, const DofMap& dofs, const ScalarField& f,
                            const std::optional<GammaTerm>& gamma_term = std::nullopt)
{
    Vector b(dofs.n_dofs, 0.0);
    if (f) {
        for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
            const double area = detail::element_geometry(mesh, e).area;
            const auto& T = mesh.triangles[e];
            for (int k = 0; k < 3; ++k) {
                // Midpoint of the edge opposite vertex k carries hat value 1/2 for the other two.
                const Point& p = mesh.vertices[T[(k + 1) % 3]];
                const Point& q = mesh.vertices[T[(k + 2) % 3]];
                const double val = f(0.5 * (p.x + q.x), 0.5 * (p.y + q.y)) * area / 3.0 * 0.5;
                for (int a : {(k + 1) % 3, (k + 2) % 3}) {
                    const std::size_t ia = dofs.dof(T[a]);
                    if (ia != DofMap::none)
                        b[ia] += val;
                }
            }
        }
    }
    if (gamma_term && gamma_term->gamma) {
        const double eps = gamma_term->eps;
        detail::gamma_load(mesh, *gamma_term->gamma, gamma_term->p, [&](std::size_t v, double w) {
            const std::size_t i = dofs.dof(v);
            if (i != DofMap::none)
                b[i] += eps * w;
        });
    }
    return b;
}

/// b_i = ∫_Γ g ψ_i
inline Vector assemble_load_1d(const Mesh2D& mesh, const GammaEmbedding& gamma, const DofMap& dofs,
                               const ScalarField& g)
{
    Vector b(dofs.n_dofs, 0.0);
    detail::gamma_load(mesh, gamma, g, [&](std::size_t v, double w) {
        const std::size_t i = dofs.dof(v);
        if (i != DofMap::none)
            b[i] += w;
    });
    return b;
}

/// ε-independent matrices of the coupled problem.
struct AssembledForms {
    SparseMatrix A_U;
    SparseMatrix A_V;
    SparseMatrix M_Q;
    SparseMatrix T;
    std::optional<SparseMatrix> M_U;

    SparseMatrix B_U(double eps) const { return multiply(M_Q, T).scaled(eps); }
    SparseMatrix B_V() const { return M_Q.scaled(-1.0); }
};

inline AssembledForms assemble_coupled_forms(const Mesh2D& mesh, const GammaEmbedding& gamma, const DofMaps& maps,
                                             bool with_mass_U = false)
{
    AssembledForms f;
    f.A_U = assemble_stiffness_2d(mesh, maps.U);
    f.A_V = assemble_stiffness_1d(mesh, gamma, maps.V);
    f.M_Q = assemble_mass_1d(mesh, gamma, maps.Q);
    f.T = assemble_trace_matrix(maps.U, maps.Q);
    if (with_mass_U)
        f.M_U = assemble_mass_2d(mesh, maps.U);
    return f;
}

} // namespace capcon
