#pragma once

#include "capcon/systems.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace capcon {

// ---------------------------------------------------------------------------
// Spectra
// ---------------------------------------------------------------------------

/// Eigenvalues of the pencil (A, Binv) with Binv SPD, by dense Cholesky congruence.
inline Vector generalized_spectrum(const LinearOperator& A, const LinearOperator& Binv, std::size_t n,
                                   const EigenOptions& opt = {})
{
    if (n > dense_threshold)
        throw TooLargeForDense("generalized spectrum: " + std::to_string(n) + " unknowns exceed the dense threshold");
    DenseMatrix Ad(n, n), Bd(n, n);
    Vector e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        Ad.set_column(j, A(e));
        Bd.set_column(j, Binv(e));
        e[j] = 0.0;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            Ad(i, j) = Ad(j, i) = 0.5 * (Ad(i, j) + Ad(j, i));
            Bd(i, j) = Bd(j, i) = 0.5 * (Bd(i, j) + Bd(j, i));
        }
    DenseCholesky L(Bd);
    return sym_eigenvalues(detail::congruence_inverse(L, Ad), opt);
}

inline Vector generalized_spectrum(const BlockSystem& sys, const BlockPreconditioner& P, const EigenOptions& opt = {})
{
    return generalized_spectrum(sys.op(), [&P](const Vector& x) { return P.apply_inverse(x); }, sys.size(), opt);
}

/// Eigenvalues of (𝔸, 𝔹⁻¹) through the exact subspace reduction. With
/// G = [[Tᵀ, 0], [0, I]] (coupled) or G = Tᵀ (boundary multiplier), every block
/// preconditioner here satisfies range(A_W − P_W) ⊆ range(G) and range(Bᵀ) ⊆ range(G),
/// so vectors (w, 0) with Gᵀw = 0 are eigenvectors with eigenvalue 1 and the rest
/// of the spectrum is that of the projected pencil on span(P_W⁻¹G) × Q.
inline Vector reduced_spectrum(const BlockSystem& sys, const BlockPreconditioner& P, const EigenOptions& opt = {})
{
    const std::size_t nu = sys.n_U(), nv = sys.n_V(), nq = sys.n_Q();
    const bool coupled = sys.kind() == ProblemKind::Coupled;
    const std::size_t k = coupled ? 2 * nq : nq;
    if (k + nq > dense_threshold)
        throw TooLargeForDense("reduced spectrum: projected pencil exceeds the dense threshold");

    const SparseMatrix& T = sys.T();
    const SparseMatrix Tt = T.transpose();
    std::vector<bool> on_gamma(nu, false);
    for (std::size_t i = 0; i < T.rows(); ++i)
        for (std::size_t p = T.row_ptr()[i]; p < T.row_ptr()[i + 1]; ++p)
            on_gamma[T.col_idx()[p]] = true;

    // Guard: A_W − P_W must vanish on the complement of range(G).
    {
        std::mt19937_64 rng(7);
        Vector zu = random_vector(nu, rng);
        for (std::size_t i = 0; i < nu; ++i)
            if (on_gamma[i])
                zu[i] = 0.0;
        const Vector au = sys.A_U().apply(zu);
        Vector d = au;
        axpy(-1.0, P.inverse[0](zu), d);
        if (norm2(d) > 1e-10 * std::max(1.0, norm2(au)))
            throw InvalidArgument("reduced spectrum: preconditioner block does not match the reduction structure");
    }

    // Columns of V = P_W⁻¹ G, split into U and V parts.
    DenseMatrix VU(nu, k), VV(nv, k);
    Vector e(nq, 0.0);
    for (std::size_t j = 0; j < nq; ++j) {
        e[j] = 1.0;
        VU.set_column(j, P.solve[0](Tt.apply(e)));
        if (coupled)
            VV.set_column(nq + j, P.solve[1](e));
        e[j] = 0.0;
    }

    // K = [VᵀA_W V, (BV)ᵀ; BV, 0], D = [GᵀV, 0; 0, R].
    const std::size_t m = k + nq;
    DenseMatrix K(m, m), D(m, m);
    std::vector<Vector> AWV(k), BV(k), GtV(k);
    for (std::size_t c = 0; c < k; ++c) {
        const Vector vu = VU.column(c);
        const Vector vv = VV.column(c);
        Vector awv(nu + nv);
        const Vector au = sys.A_U().apply(vu);
        std::copy(au.begin(), au.end(), awv.begin());
        if (nv > 0) {
            const Vector av = sys.A_V().apply(vv);
            std::copy(av.begin(), av.end(), awv.begin() + static_cast<std::ptrdiff_t>(nu));
        }
        AWV[c] = std::move(awv);
        Vector bv = sys.B_U().apply(vu);
        if (nv > 0)
            axpy(1.0, sys.B_V().apply(vv), bv);
        BV[c] = std::move(bv);
        Vector g(k, 0.0);
        const Vector tu = T.apply(vu);
        for (std::size_t i = 0; i < nq; ++i)
            g[i] = tu[i];
        if (coupled)
            for (std::size_t i = 0; i < nq; ++i)
                g[nq + i] = vv[i];
        GtV[c] = std::move(g);
    }
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < nu; ++i)
                s += VU(i, a) * AWV[b][i];
            for (std::size_t i = 0; i < nv; ++i)
                s += VV(i, a) * AWV[b][nu + i];
            K(a, b) = s;
            D(a, b) = GtV[b][a];
        }
        for (std::size_t i = 0; i < nq; ++i) {
            K(k + i, a) = BV[a][i];
            K(a, k + i) = BV[a][i];
        }
    }
    for (std::size_t j = 0; j < nq; ++j) {
        e[j] = 1.0;
        const Vector r = P.inverse[2](e);
        for (std::size_t i = 0; i < nq; ++i)
            D(k + i, k + j) = r[i];
        e[j] = 0.0;
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            K(i, j) = K(j, i) = 0.5 * (K(i, j) + K(j, i));
            D(i, j) = D(j, i) = 0.5 * (D(i, j) + D(j, i));
        }
    DenseCholesky L(D);
    Vector ev = sym_eigenvalues(detail::congruence_inverse(L, K), opt);
    ev.insert(ev.end(), nu + nv - k, 1.0);
    std::sort(ev.begin(), ev.end());
    return ev;
}

enum class SpectrumRoute { Auto, Dense, Reduced };

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x, double tol) const { return x >= lo - tol && x <= hi + tol; }
};

struct SpectrumReport {
    Vector eigenvalues;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double abs_min = 0.0;
    double abs_max = 0.0;
    double kappa = 0.0;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    Interval I_minus;
    Interval I_plus;
    SpectrumRoute route = SpectrumRoute::Auto;
};

inline SpectrumReport summarize_spectrum(Vector ev)
{
    SpectrumReport r;
    std::sort(ev.begin(), ev.end());
    r.eigenvalues = std::move(ev);
    if (r.eigenvalues.empty())
        return r;
    r.lambda_min = r.eigenvalues.front();
    r.lambda_max = r.eigenvalues.back();
    r.abs_min = std::numeric_limits<double>::infinity();
    for (double l : r.eigenvalues) {
        r.abs_min = std::min(r.abs_min, std::abs(l));
        r.abs_max = std::max(r.abs_max, std::abs(l));
    }
    r.kappa = r.abs_max / r.abs_min;
    return r;
}

/// Spectral condition number max|λ| / min|λ| of the pencil (𝔸, 𝔹⁻¹).
inline SpectrumReport condition_number(const BlockSystem& sys, const BlockPreconditioner& P,
                                       SpectrumRoute route = SpectrumRoute::Auto)
{
    if (route == SpectrumRoute::Auto)
        route = SpectrumRoute::Reduced;
    SpectrumReport r = summarize_spectrum(route == SpectrumRoute::Dense ? generalized_spectrum(sys, P)
                                                                        : reduced_spectrum(sys, P));
    r.route = route;
    return r;
}

/// Eigenvalues of the pencil (S, N_Q⁻¹); these are the squared singular values of the
/// off-diagonal block of the symmetrically preconditioned system.
inline Vector schur_nq_pencil(const BlockSystem& sys, FractionalMode mode = FractionalMode::Exact)
{
    const DenseMatrix S = schur_complement(sys);
    const DenseMatrix Ninv = sys.factors().fractional(mode).nq_inverse_matrix(sys.eps());
    return sym_gevp_dense(S, Ninv, false).values;
}

inline Interval rusten_minus(double smin, double smax)
{
    return {0.5 * (1.0 - std::sqrt(1.0 + 4.0 * smax * smax)), 0.5 * (1.0 - std::sqrt(1.0 + 4.0 * smin * smin))};
}

inline Interval rusten_plus(double smax) { return {1.0, 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * smax * smax))}; }

/// Q-cap spectrum together with the containment intervals I⁻ ∪ I⁺.
inline SpectrumReport spectrum_intervals(const BlockSystem& sys, SpectrumRoute route = SpectrumRoute::Auto)
{
    const BlockPreconditioner P = qcap_preconditioner(sys);
    SpectrumReport r = condition_number(sys, P, route);
    const Vector s2 = schur_nq_pencil(sys);
    r.sigma_min = std::sqrt(s2.front());
    r.sigma_max = std::sqrt(s2.back());
    r.I_minus = rusten_minus(r.sigma_min, r.sigma_max);
    r.I_plus = rusten_plus(r.sigma_max);
    return r;
}

/// Largest distance from any value to I⁻ ∪ I⁺ (0 when everything is contained).
inline double containment_violation(const SpectrumReport& r)
{
    double worst = 0.0;
    for (double l : r.eigenvalues) {
        const double dm = l < r.I_minus.lo ? r.I_minus.lo - l : (l > r.I_minus.hi ? l - r.I_minus.hi : 0.0);
        const double dp = l < r.I_plus.lo ? r.I_plus.lo - l : (l > r.I_plus.hi ? l - r.I_plus.hi : 0.0);
        worst = std::max(worst, std::min(dm, dp));
    }
    return worst;
}

/// Largest distance from an eigenvalue to the nearest point of {1, ½ ± ½√5}.
inline double cluster_distance(const Vector& ev)
{
    const double s5 = std::sqrt(5.0);
    const double pts[3] = {0.5 * (1.0 - s5), 1.0, 0.5 * (1.0 + s5)};
    double worst = 0.0;
    for (double l : ev) {
        double d = std::numeric_limits<double>::infinity();
        for (double p : pts)
            d = std::min(d, std::abs(l - p));
        worst = std::max(worst, d);
    }
    return worst;
}

/// Upper bound (1 + √(1+4C₂)) / (√(1+4C₁) − 1) with C₁ = min(1, c₁), C₂ = √(1 + c₂²).
inline double kappa_bound(double c1, double c2)
{
    const double C1 = std::min(1.0, c1);
    const double C2 = std::sqrt(1.0 + c2 * c2);
    return (1.0 + std::sqrt(1.0 + 4.0 * C2)) / (std::sqrt(1.0 + 4.0 * C1) - 1.0);
}

// ---------------------------------------------------------------------------
// Trace constants and inf-sup
// ---------------------------------------------------------------------------

struct TraceConstantSeq {
    std::vector<std::size_t> n;
    std::vector<std::size_t> n_Q;
    Vector lambda_min;
    Vector lambda_max;
    double c1 = 0.0;
    double c2 = 0.0;
};

/// Extreme eigenvalues of T A_U⁻¹ Tᵀ p = λ H(½)⁻¹ p.
inline std::pair<double, double> trace_pencil_extremes(const Discretization& d)
{
    const DenseMatrix& X = d.factors->trace_schur();
    const DenseMatrix Hinv = d.factors->fractional(FractionalMode::Exact).hmat_inverse(0.5);
    const Vector ev = sym_gevp_dense(X, Hinv, false).values;
    return {ev.front(), ev.back()};
}

/// Geometry (a) on each mesh in `ns`; limits are the values on the last mesh.
inline TraceConstantSeq trace_constant_sequence(const std::vector<std::size_t>& ns)
{
    TraceConstantSeq seq;
    for (std::size_t n : ns) {
        auto d = discretize_coupled(n);
        const auto [lo, hi] = trace_pencil_extremes(*d);
        seq.n.push_back(n);
        seq.n_Q.push_back(d->M_Q.rows());
        seq.lambda_min.push_back(lo);
        seq.lambda_max.push_back(hi);
    }
    if (!ns.empty()) {
        seq.c1 = seq.lambda_min.back();
        seq.c2 = seq.lambda_max.back();
    }
    return seq;
}

enum class InfSupNorm { Qcap, Wcap };

/// β_h = √λ_min of (B P_W⁻¹ Bᵀ, R) with P_W the W-norm and R the Q-norm matrix.
/// With `suppress_u` the U component is left out of the supremum.
inline double infsup_constant(const BlockSystem& sys, InfSupNorm norm, bool suppress_u = false)
{
    const BlockPreconditioner P = norm == InfSupNorm::Qcap ? qcap_preconditioner(sys) : wcap_preconditioner(sys);
    const std::size_t nq = sys.n_Q();
    if (nq > dense_threshold)
        throw TooLargeForDense("inf-sup: multiplier space exceeds the dense threshold");
    const SparseMatrix BUt = sys.B_U().transpose();
    const SparseMatrix BVt = sys.B_V().transpose();
    DenseMatrix S(nq, nq), R(nq, nq);
    Vector e(nq, 0.0);
    for (std::size_t j = 0; j < nq; ++j) {
        e[j] = 1.0;
        Vector col = sys.B_V().apply(P.solve[1](BVt.apply(e)));
        if (!suppress_u)
            axpy(1.0, sys.B_U().apply(P.solve[0](BUt.apply(e))), col);
        S.set_column(j, col);
        R.set_column(j, P.inverse[2](e));
        e[j] = 0.0;
    }
    for (std::size_t i = 0; i < nq; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            S(i, j) = S(j, i) = 0.5 * (S(i, j) + S(j, i));
            R(i, j) = R(j, i) = 0.5 * (R(i, j) + R(j, i));
        }
    const Vector ev = sym_gevp_dense(S, R, false).values;
    return std::sqrt(std::max(0.0, ev.front()));
}

// ---------------------------------------------------------------------------
// Manufactured solution and convergence
// ---------------------------------------------------------------------------

/// u = sin(πx)sin(πy), v = ε sin(πy), p = sin(πy) on geometry (a).
struct ManufacturedSolution {
    double eps = 1.0;

    static constexpr double pi = std::numbers::pi;

    double u(double x, double y) const { return std::sin(pi * x) * std::sin(pi * y); }
    std::array<double, 2> grad_u(double x, double y) const
    {
        return {pi * std::cos(pi * x) * std::sin(pi * y), pi * std::sin(pi * x) * std::cos(pi * y)};
    }
    double v(double y) const { return eps * std::sin(pi * y); }
    double dv(double y) const { return eps * pi * std::cos(pi * y); }
    double p(double y) const { return std::sin(pi * y); }
    double f(double x, double y) const { return 2.0 * pi * pi * u(x, y); }
    double g(double y) const { return (eps * pi * pi - 1.0) * std::sin(pi * y); }
};

/// Right-hand side [f; g; 0] of the manufactured problem.
inline Vector manufactured_rhs(const BlockSystem& sys)
{
    require(sys.kind() == ProblemKind::Coupled, "manufactured right-hand side is defined for the coupled problem");
    const Discretization& d = sys.disc();
    const ManufacturedSolution ms{sys.eps()};
    GammaTerm gt;
    gt.gamma = &d.gamma;
    gt.p = [ms](double, double y) { return ms.p(y); };
    gt.eps = sys.eps();
    const Vector bu = assemble_load(d.mesh, d.maps.U, [ms](double x, double y) { return ms.f(x, y); }, gt);
    const Vector bv = assemble_load_1d(d.mesh, d.gamma, d.maps.V, [ms](double, double y) { return ms.g(y); });
    Vector b(sys.size(), 0.0);
    std::copy(bu.begin(), bu.end(), b.begin());
    std::copy(bv.begin(), bv.end(), b.begin() + static_cast<std::ptrdiff_t>(bu.size()));
    return b;
}

/// Right-hand side for the boundary multiplier problem with u = cos(πx)cos(πy),
/// which has zero normal derivative on ∂Ω, and g its trace on the left edge.
inline Vector babuska_rhs(const BlockSystem& sys)
{
    require(sys.kind() == ProblemKind::Babuska, "boundary multiplier right-hand side needs that problem");
    const Discretization& d = sys.disc();
    const double pi = std::numbers::pi;
    const Vector bu = assemble_load(d.mesh, d.maps.U, [pi](double x, double y) {
        return (2.0 * pi * pi + 1.0) * std::cos(pi * x) * std::cos(pi * y);
    });
    const Vector bq = assemble_load_1d(d.mesh, d.gamma, d.maps.Q, [pi](double, double y) { return std::cos(pi * y); });
    Vector b(sys.size(), 0.0);
    std::copy(bu.begin(), bu.end(), b.begin());
    std::copy(bq.begin(), bq.end(), b.begin() + static_cast<std::ptrdiff_t>(bu.size()));
    return b;
}

/// |u − u_h|₁ over Ω with a degree-4 triangle rule.
inline double h1_error_2d(const Mesh2D& mesh, const DofMap& dofs, const Vector& uh,
                          const std::function<std::array<double, 2>(double, double)>& grad_exact)
{
    static constexpr double a1 = 0.445948490915965, b1 = 0.108103018168070, w1 = 0.223381589678011;
    static constexpr double a2 = 0.091576213509771, b2 = 0.816847572980459, w2 = 0.109951743655322;
    static constexpr double pts[6][3] = {{a1, a1, b1}, {a1, b1, a1}, {b1, a1, a1},
                                         {a2, a2, b2}, {a2, b2, a2}, {b2, a2, a2}};
    static constexpr double wts[6] = {w1, w1, w1, w2, w2, w2};
    double err2 = 0.0;
    for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
        const auto g = detail::element_geometry(mesh, e);
        const auto& T = mesh.triangles[e];
        double gh[2] = {0.0, 0.0};
        for (int a = 0; a < 3; ++a) {
            const std::size_t ia = dofs.dof(T[a]);
            const double val = ia == DofMap::none ? 0.0 : uh[ia];
            gh[0] += val * g.grad[a][0];
            gh[1] += val * g.grad[a][1];
        }
        const Point& A = mesh.vertices[T[0]];
        const Point& B = mesh.vertices[T[1]];
        const Point& C = mesh.vertices[T[2]];
        for (int q = 0; q < 6; ++q) {
            const double x = pts[q][0] * A.x + pts[q][1] * B.x + pts[q][2] * C.x;
            const double y = pts[q][0] * A.y + pts[q][1] * B.y + pts[q][2] * C.y;
            const auto ge = grad_exact(x, y);
            const double dx = ge[0] - gh[0], dy = ge[1] - gh[1];
            err2 += wts[q] * g.area * (dx * dx + dy * dy);
        }
    }
    return std::sqrt(err2);
}

/// |v − v_h|₁ over Γ with three-point Gauss per segment.
inline double h1_error_1d(const Mesh2D& mesh, const GammaEmbedding& gamma, const DofMap& dofs, const Vector& vh,
                          const std::function<double(double, double)>& tangential_derivative)
{
    const double r = std::sqrt(0.6);
    const double xs[3] = {0.5 * (1.0 - r), 0.5, 0.5 * (1.0 + r)};
    const double ws[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    const auto len = gamma.edge_lengths(mesh);
    double err2 = 0.0;
    for (std::size_t e = 0; e < gamma.gamma_edges.size(); ++e) {
        const std::size_t a = gamma.gamma_edges[e][0], b = gamma.gamma_edges[e][1];
        const std::size_t ia = dofs.dof(a), ib = dofs.dof(b);
        const double va = ia == DofMap::none ? 0.0 : vh[ia];
        const double vb = ib == DofMap::none ? 0.0 : vh[ib];
        const double slope = (vb - va) / len[e];
        const Point& A = mesh.vertices[a];
        const Point& B = mesh.vertices[b];
        for (int q = 0; q < 3; ++q) {
            const double x = A.x + xs[q] * (B.x - A.x), y = A.y + xs[q] * (B.y - A.y);
            const double d = tangential_derivative(x, y) - slope;
            err2 += ws[q] * len[e] * d * d;
        }
    }
    return std::sqrt(err2);
}

struct ConvergenceRow {
    std::size_t n = 0;
    std::size_t size = 0;
    double h = 0.0;
    double error_u = 0.0;
    double error_v = 0.0;
    double rate_u = std::numeric_limits<double>::quiet_NaN();
    double rate_v = std::numeric_limits<double>::quiet_NaN();
    std::size_t iterations = 0;
    bool converged = false;
    Vector solution;
};

using ConvergenceTable = std::vector<ConvergenceRow>;

struct SolveSettings {
    double tol = 1e-12;
    std::size_t max_iter = 500;
    std::uint64_t seed = 42;
    FractionalMode mode = FractionalMode::Exact;
};

/// MinRes on 𝔸x = b from a uniform [0,1) random start.
inline SolveReport solve_system(const BlockSystem& sys, const BlockPreconditioner& P, const Vector& b,
                                const SolveSettings& s)
{
    std::mt19937_64 rng(s.seed);
    Vector x0 = random_vector(sys.size(), rng);
    MinresOptions opt;
    opt.tol = s.tol;
    opt.max_iter = s.max_iter;
    SolveReport rep = minres(sys.op(), P.op(), b, std::move(x0), opt);
    rep.setup_seconds = P.setup_seconds;
    return rep;
}

/// Manufactured-solution errors on each mesh of `ns` (geometry (a)).
inline ConvergenceTable convergence_study(const std::vector<std::size_t>& ns, double eps, PreconditionerKind kind,
                                          const SolveSettings& s = {})
{
    ConvergenceTable table;
    const ManufacturedSolution ms{eps};
    for (std::size_t n : ns) {
        BlockSystem sys = build_coupled(n, eps);
        const BlockPreconditioner P = make_preconditioner(sys, kind, s.mode);
        const SolveReport rep = solve_system(sys, P, manufactured_rhs(sys), s);
        const Discretization& d = sys.disc();
        ConvergenceRow row;
        row.n = n;
        row.size = sys.size();
        row.h = d.mesh.h;
        row.iterations = rep.iterations;
        row.converged = rep.converged;
        const Vector uh(rep.solution.begin(), rep.solution.begin() + static_cast<std::ptrdiff_t>(sys.n_U()));
        const Vector vh(rep.solution.begin() + static_cast<std::ptrdiff_t>(sys.n_U()),
                        rep.solution.begin() + static_cast<std::ptrdiff_t>(sys.n_W()));
        row.error_u = h1_error_2d(d.mesh, d.maps.U, uh, [ms](double x, double y) { return ms.grad_u(x, y); });
        row.error_v = h1_error_1d(d.mesh, d.gamma, d.maps.V, vh, [ms](double, double y) { return ms.dv(y); });
        if (!table.empty()) {
            const ConvergenceRow& prev = table.back();
            const double lh = std::log(prev.h / row.h);
            row.rate_u = std::log(prev.error_u / row.error_u) / lh;
            row.rate_v = std::log(prev.error_v / row.error_v) / lh;
        }
        row.solution = rep.solution;
        table.push_back(std::move(row));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Table conventions
// ---------------------------------------------------------------------------

/// How printed table coordinates map to the discretization.
/// Literal: a row size s means the mesh with (n−1)² + 2(n−1) = s and the column ε is the
/// coupling parameter. Table: the same row label is computed on the mesh with n − 2 cells
/// per side and the column value is ε², i.e. the coupling parameter is its square root.
enum class TableConvention { Table, Literal };

/// Coupled-system size on an n × n grid with the midline: (n−1)² + 2(n−1).
inline std::size_t coupled_size(std::size_t n) { return (n - 1) * (n - 1) + 2 * (n - 1); }

/// Boundary multiplier system size: (n+1)² + (n+1).
inline std::size_t babuska_size(std::size_t n) { return (n + 1) * (n + 1) + (n + 1); }

/// Cells per side whose coupled system has exactly `size` unknowns.
inline std::size_t labelled_n(std::size_t size)
{
    const auto root = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(size + 1))));
    if (root < 2 || coupled_size(root) != size)
        throw InvalidArgument("size " + std::to_string(size) + " is not a coupled-system size on a square grid");
    return root;
}

inline std::size_t mesh_for_size(std::size_t size, TableConvention c)
{
    const std::size_t n = labelled_n(size);
    if (c == TableConvention::Literal)
        return n;
    if (n < 4)
        throw InvalidArgument("size " + std::to_string(size) + " has no table-convention mesh");
    return n - 2;
}

inline double coupling_eps(double table_eps, TableConvention c)
{
    return c == TableConvention::Table ? std::sqrt(table_eps) : table_eps;
}

// ---------------------------------------------------------------------------
// Cell fan-out
// ---------------------------------------------------------------------------

/// Worker count from CAPCON_THREADS (default 1).
inline std::size_t worker_count()
{
    const char* env = std::getenv("CAPCON_THREADS");
    if (!env)
        return 1;
    const long v = std::strtol(env, nullptr, 10);
    return v > 0 ? static_cast<std::size_t>(v) : 1;
}

/// Runs fn(i) for i in [0, count) on up to worker_count() threads.
inline void for_each_cell(std::size_t count, const std::function<void(std::size_t)>& fn)
{
    const std::size_t workers = std::min(worker_count(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Iteration tables
// ---------------------------------------------------------------------------

struct IterationCell {
    std::size_t n = 0;
    std::size_t size = 0;
    std::size_t n_Q = 0;
    double eps = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double seconds = 0.0;
};

/// MinRes iteration counts for every (mesh, ε) pair with the manufactured right-hand side.
inline std::vector<IterationCell> run_iteration_table(const std::vector<std::size_t>& ns, const Vector& eps_list,
                                                      PreconditionerKind kind, const SolveSettings& s = {})
{
    std::vector<IterationCell> cells(ns.size() * eps_list.size());
    for (std::size_t a = 0; a < ns.size(); ++a) {
        auto d = discretize_coupled(ns[a]);
        for_each_cell(eps_list.size(), [&](std::size_t b) {
            BlockSystem sys(d, eps_list[b]);
            const BlockPreconditioner P = make_preconditioner(sys, kind, s.mode);
            const SolveReport rep = solve_system(sys, P, manufactured_rhs(sys), s);
            IterationCell& c = cells[a * eps_list.size() + b];
            c.n = ns[a];
            c.size = sys.size();
            c.n_Q = sys.n_Q();
            c.eps = eps_list[b];
            c.iterations = rep.iterations;
            c.converged = rep.converged;
            c.seconds = rep.solve_seconds + P.setup_seconds;
        });
    }
    return cells;
}

/// Iteration counts for the boundary multiplier problem (tolerance 1e-10 by default).
inline std::vector<IterationCell> run_babuska_iterations(const std::vector<std::size_t>& ns, SolveSettings s)
{
    std::vector<IterationCell> cells(ns.size());
    for_each_cell(ns.size(), [&](std::size_t a) {
        BlockSystem sys(discretize_babuska(ns[a]), 1.0);
        const BlockPreconditioner P = babuska_preconditioner(sys, s.mode);
        const SolveReport rep = solve_system(sys, P, babuska_rhs(sys), s);
        IterationCell& c = cells[a];
        c.n = ns[a];
        c.size = sys.size();
        c.n_Q = sys.n_Q();
        c.eps = 1.0;
        c.iterations = rep.iterations;
        c.converged = rep.converged;
        c.seconds = rep.solve_seconds + P.setup_seconds;
    });
    return cells;
}

// ---------------------------------------------------------------------------
// Timings
// ---------------------------------------------------------------------------

struct TimingRow {
    std::size_t n = 0;
    std::size_t n_Q = 0;
    std::size_t size = 0;
    /// Sparse factorizations of A_U and A_V.
    double factor_seconds = 0.0;
    /// Eigendecomposition of the Γ pencil.
    double gevp_seconds = 0.0;
    double qcap_solve_seconds = 0.0;
    std::size_t qcap_iterations = 0;
    /// Factorization of A_U + ε²TᵀAT and of M.
    double wcap_setup_seconds = 0.0;
    double wcap_solve_seconds = 0.0;
    std::size_t wcap_iterations = 0;
};

struct TimingReport {
    std::vector<TimingRow> rows;
    /// Least-squares slope of log(time) against log(n_Q).
    double gevp_exponent = 0.0;
    double factor_exponent = 0.0;
    double qcap_solve_exponent = 0.0;
    double wcap_solve_exponent = 0.0;
};

/// Per-step exponents r_i = Δlog v / Δlog m.
inline Vector step_exponents(const Vector& m, const Vector& v)
{
    Vector r;
    for (std::size_t i = 1; i < m.size(); ++i)
        r.push_back((std::log(v[i]) - std::log(v[i - 1])) / (std::log(m[i]) - std::log(m[i - 1])));
    return r;
}

/// Least-squares slope of log v against log m.
inline double fitted_exponent(const Vector& m, const Vector& v)
{
    const std::size_t k = m.size();
    if (k < 2)
        return std::numeric_limits<double>::quiet_NaN();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double x = std::log(m[i]), y = std::log(v[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double kk = static_cast<double>(k);
    return (kk * sxy - sx * sy) / (kk * sxx - sx * sx);
}

/// Setup and solve times at ε = 1 on each mesh of `ns`; the eigendecomposition time is the
/// minimum over `repeats` runs.
inline TimingReport timing_harness(const std::vector<std::size_t>& ns, FractionalMode mode,
                                   const SolveSettings& s = {}, std::size_t repeats = 1)
{
    TimingReport rep;
    for (std::size_t n : ns) {
        auto d = discretize_coupled(n);
        BlockSystem sys(d, 1.0);
        TimingRow row;
        row.n = n;
        row.n_Q = sys.n_Q();
        row.size = sys.size();
        {
            detail::Stopwatch sw;
            (void)d->factors->A_U();
            (void)d->factors->A_V();
            row.factor_seconds = sw.seconds();
        }
        row.gevp_seconds = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < std::max<std::size_t>(repeats, 1); ++k) {
            detail::Stopwatch sw;
            const FractionalOperator F = mode == FractionalMode::Exact ? build_fractional(d->A_gamma, d->M_Q)
                                                                       : build_fractional_lumped(d->A_gamma, d->M_Q);
            row.gevp_seconds = std::min(row.gevp_seconds, sw.seconds());
        }
        (void)d->factors->fractional(mode);
        const Vector b = manufactured_rhs(sys);
        {
            const BlockPreconditioner P = qcap_preconditioner(sys, mode);
            const SolveReport r = solve_system(sys, P, b, s);
            row.qcap_solve_seconds = r.solve_seconds;
            row.qcap_iterations = r.iterations;
        }
        {
            detail::Stopwatch sw;
            (void)d->factors->M_Q();
            const BlockPreconditioner P = wcap_preconditioner(sys);
            row.wcap_setup_seconds = sw.seconds();
            const SolveReport r = solve_system(sys, P, b, s);
            row.wcap_solve_seconds = r.solve_seconds;
            row.wcap_iterations = r.iterations;
        }
        rep.rows.push_back(row);
    }
    Vector m, g, f, q, w;
    for (const auto& r : rep.rows) {
        m.push_back(static_cast<double>(r.n_Q));
        g.push_back(std::max(r.gevp_seconds, 1e-9));
        f.push_back(std::max(r.factor_seconds, 1e-9));
        q.push_back(std::max(r.qcap_solve_seconds, 1e-9));
        w.push_back(std::max(r.wcap_solve_seconds, 1e-9));
    }
    rep.gevp_exponent = fitted_exponent(m, g);
    rep.factor_exponent = fitted_exponent(m, f);
    rep.qcap_solve_exponent = fitted_exponent(m, q);
    rep.wcap_solve_exponent = fitted_exponent(m, w);
    return rep;
}

} // namespace capcon
