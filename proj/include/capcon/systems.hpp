#pragma once

#include "capcon/assembly.hpp"
#include "capcon/cholesky.hpp"
#include "capcon/fractional.hpp"
#include "capcon/mesh.hpp"
#include "capcon/minres.hpp"

#include <chrono>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace capcon {

enum class ProblemKind { Coupled, Babuska };

namespace detail {

template <class T, class F>
const T& lazy(std::once_flag& flag, std::shared_ptr<T>& slot, F make)
{
    std::call_once(flag, [&] { slot = std::make_shared<T>(make()); });
    return *slot;
}

} // namespace detail

/// ε-independent factorizations shared by every system built on the same mesh.
/// Each entry is computed on first use.
class SystemFactors {
public:
    SystemFactors(const SparseMatrix* A_U, const SparseMatrix* A_V, const SparseMatrix* M_Q,
                  const SparseMatrix* A_gamma, const SparseMatrix* T)
        : A_U_(A_U), A_V_(A_V), M_Q_(M_Q), A_gamma_(A_gamma), T_(T)
    {
    }

    const SparseCholesky& A_U() { return detail::lazy(f_au_, au_, [&] { return SparseCholesky(*A_U_); }); }
    const SparseCholesky& A_V() { return detail::lazy(f_av_, av_, [&] { return SparseCholesky(*A_V_); }); }
    const SparseCholesky& M_Q() { return detail::lazy(f_m_, m_, [&] { return SparseCholesky(*M_Q_); }); }

    const FractionalOperator& fractional(FractionalMode mode)
    {
        if (mode == FractionalMode::Lumped)
            return detail::lazy(f_lu_, lumped_,
                                [&] { return rebase_on_mass(build_fractional_lumped(*A_gamma_, *M_Q_), *M_Q_); });
        return detail::lazy(f_ex_, exact_, [&] { return build_fractional(*A_gamma_, *M_Q_); });
    }

    /// T A_U⁻¹ Tᵀ, dense n_Q × n_Q.
    const DenseMatrix& trace_schur()
    {
        return detail::lazy(f_ts_, ts_, [&] {
            const SparseCholesky& F = A_U();
            const SparseMatrix Tt = T_->transpose();
            const std::size_t nq = T_->rows();
            DenseMatrix X(nq, nq);
            Vector e(nq, 0.0);
            for (std::size_t j = 0; j < nq; ++j) {
                e[j] = 1.0;
                X.set_column(j, T_->apply(F.solve(Tt.apply(e))));
                e[j] = 0.0;
            }
            return X;
        });
    }

private:
    const SparseMatrix* A_U_;
    const SparseMatrix* A_V_;
    const SparseMatrix* M_Q_;
    const SparseMatrix* A_gamma_;
    const SparseMatrix* T_;
    std::once_flag f_au_, f_av_, f_m_, f_ex_, f_lu_, f_ts_;
    std::shared_ptr<SparseCholesky> au_, av_, m_;
    std::shared_ptr<FractionalOperator> exact_, lumped_;
    std::shared_ptr<DenseMatrix> ts_;
};

/// Mesh, embedding, dof maps and ε-independent matrices of one discretization.
struct Discretization {
    ProblemKind kind = ProblemKind::Coupled;
    Mesh2D mesh;
    GammaEmbedding gamma;
    DofMaps maps;
    SparseMatrix A_U;
    SparseMatrix A_V;
    SparseMatrix M_Q;
    SparseMatrix T;
    /// Operator of the (A, M) pencil behind H(s).
    SparseMatrix A_gamma;
    std::unique_ptr<SystemFactors> factors;

    Discretization() = default;
    Discretization(const Discretization&) = delete;
    Discretization& operator=(const Discretization&) = delete;

    void make_factors()
    {
        factors = std::make_unique<SystemFactors>(&A_U, &A_V, &M_Q, &A_gamma, &T);
    }
};

inline std::shared_ptr<Discretization> discretize_coupled(Mesh2D mesh, GammaEmbedding gamma)
{
    auto d = std::make_shared<Discretization>();
    d->kind = ProblemKind::Coupled;
    d->mesh = std::move(mesh);
    d->gamma = std::move(gamma);
    d->maps = build_dof_maps(d->mesh, d->gamma, BoundaryConditions::Coupled);
    AssembledForms f = assemble_coupled_forms(d->mesh, d->gamma, d->maps);
    d->A_U = std::move(f.A_U);
    d->A_V = std::move(f.A_V);
    d->M_Q = std::move(f.M_Q);
    d->T = std::move(f.T);
    d->A_gamma = d->A_V;
    d->make_factors();
    return d;
}

/// Geometry (a) on an n × n grid.
inline std::shared_ptr<Discretization> discretize_coupled(std::size_t n)
{
    Mesh2D mesh = build_unit_square_mesh(n);
    GammaEmbedding gamma = embed_midline(mesh);
    return discretize_coupled(std::move(mesh), std::move(gamma));
}

/// Boundary multiplier problem: −Δu + u = f on the unit square, trace constraint on the left edge.
inline std::shared_ptr<Discretization> discretize_babuska(std::size_t n)
{
    auto d = std::make_shared<Discretization>();
    d->kind = ProblemKind::Babuska;
    d->mesh = build_unit_square_mesh(n);
    d->gamma = embed_left_edge(d->mesh);
    d->maps = build_dof_maps(d->mesh, d->gamma, BoundaryConditions::Babuska);
    d->A_U = add(assemble_stiffness_2d(d->mesh, d->maps.U), assemble_mass_2d(d->mesh, d->maps.U));
    d->A_U.set_symmetric_flag(true);
    d->A_V = SparseMatrix(0, 0);
    d->M_Q = assemble_mass_1d(d->mesh, d->gamma, d->maps.Q);
    d->T = assemble_trace_matrix(d->maps.U, d->maps.Q);
    d->A_gamma = add(assemble_stiffness_1d(d->mesh, d->gamma, d->maps.Q), d->M_Q);
    d->A_gamma.set_symmetric_flag(true);
    d->make_factors();
    return d;
}

/// Saddle-point operator [A_U, ·, B_Uᵀ; ·, A_V, B_Vᵀ; B_U, B_V, ·]. For the boundary
/// multiplier problem the V block is empty.
class BlockSystem {
public:
    BlockSystem(std::shared_ptr<Discretization> disc, double eps) : disc_(std::move(disc)), eps_(eps)
    {
        require(eps > 0.0, "coupling parameter must be positive");
        if (disc_->kind == ProblemKind::Coupled) {
            B_U_ = multiply(disc_->M_Q, disc_->T).scaled(eps);
            B_V_ = disc_->M_Q.scaled(-1.0);
        } else {
            B_U_ = multiply(disc_->M_Q, disc_->T);
            B_V_ = SparseMatrix(disc_->M_Q.rows(), 0);
        }
        B_Ut_ = B_U_.transpose();
        B_Vt_ = B_V_.transpose();
    }

    BlockSystem with_eps(double eps) const { return BlockSystem(disc_, eps); }

    ProblemKind kind() const { return disc_->kind; }
    double eps() const { return eps_; }
    const Discretization& disc() const { return *disc_; }
    const std::shared_ptr<Discretization>& disc_ptr() const { return disc_; }
    SystemFactors& factors() const { return *disc_->factors; }

    const SparseMatrix& A_U() const { return disc_->A_U; }
    const SparseMatrix& A_V() const { return disc_->A_V; }
    const SparseMatrix& M_Q() const { return disc_->M_Q; }
    const SparseMatrix& T() const { return disc_->T; }
    const SparseMatrix& B_U() const { return B_U_; }
    const SparseMatrix& B_V() const { return B_V_; }

    std::size_t n_U() const { return disc_->A_U.rows(); }
    std::size_t n_V() const { return disc_->A_V.rows(); }
    std::size_t n_Q() const { return disc_->M_Q.rows(); }
    std::size_t n_W() const { return n_U() + n_V(); }
    std::size_t size() const { return n_W() + n_Q(); }
    std::vector<std::size_t> block_sizes() const { return {n_U(), n_V(), n_Q()}; }

    Vector apply(const Vector& x) const
    {
        require(x.size() == size(), "block system apply: dimension mismatch");
        const std::size_t nu = n_U(), nv = n_V(), nq = n_Q();
        Vector y(size(), 0.0);
        const Vector u(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(nu));
        const Vector v(x.begin() + static_cast<std::ptrdiff_t>(nu), x.begin() + static_cast<std::ptrdiff_t>(nu + nv));
        const Vector p(x.begin() + static_cast<std::ptrdiff_t>(nu + nv), x.end());
        Vector yu = A_U().apply(u);
        axpy(1.0, B_Ut_.apply(p), yu);
        Vector yv = A_V().apply(v);
        axpy(1.0, B_Vt_.apply(p), yv);
        Vector yq = B_U_.apply(u);
        axpy(1.0, B_V_.apply(v), yq);
        std::copy(yu.begin(), yu.end(), y.begin());
        std::copy(yv.begin(), yv.end(), y.begin() + static_cast<std::ptrdiff_t>(nu));
        std::copy(yq.begin(), yq.end(), y.begin() + static_cast<std::ptrdiff_t>(nu + nv));
        (void)nq;
        return y;
    }

    LinearOperator op() const
    {
        return [this](const Vector& x) { return apply(x); };
    }

    /// Dense copy of the whole operator (small sizes only).
    DenseMatrix to_dense() const
    {
        if (size() > dense_threshold)
            throw TooLargeForDense("block system: " + std::to_string(size()) + " unknowns exceed the dense threshold");
        DenseMatrix D(size(), size());
        Vector e(size(), 0.0);
        for (std::size_t j = 0; j < size(); ++j) {
            e[j] = 1.0;
            D.set_column(j, apply(e));
            e[j] = 0.0;
        }
        return D;
    }

private:
    std::shared_ptr<Discretization> disc_;
    double eps_;
    SparseMatrix B_U_, B_V_, B_Ut_, B_Vt_;
};

inline BlockSystem build_coupled(std::size_t n, double eps) { return BlockSystem(discretize_coupled(n), eps); }

inline BlockSystem build_coupled(const Mesh2D& mesh, const GammaEmbedding& gamma, double eps)
{
    return BlockSystem(discretize_coupled(mesh, gamma), eps);
}

enum class PreconditionerKind { Qcap, Wcap, Schur, BabuskaRiesz };

inline std::string to_string(PreconditionerKind k)
{
    switch (k) {
    case PreconditionerKind::Qcap:
        return "qcap";
    case PreconditionerKind::Wcap:
        return "wcap";
    case PreconditionerKind::Schur:
        return "schur";
    case PreconditionerKind::BabuskaRiesz:
        return "babuska-riesz";
    }
    return "unknown";
}

/// Block-diagonal SPD preconditioner 𝔹 = diag(B₀, B₁, …). `solve[k]` applies B_k and
/// `inverse[k]` applies B_k⁻¹, the operator whose inverse the block realizes.
struct BlockPreconditioner {
    PreconditionerKind kind = PreconditionerKind::Qcap;
    std::vector<std::size_t> sizes;
    std::vector<LinearOperator> solve;
    std::vector<LinearOperator> inverse;
    /// Wall time spent building factorizations and eigendecompositions.
    double setup_seconds = 0.0;
    std::vector<std::shared_ptr<const void>> keep_alive;

    std::size_t size() const
    {
        std::size_t s = 0;
        for (std::size_t k : sizes)
            s += k;
        return s;
    }

    Vector apply(const Vector& x) const { return blockwise(solve, x); }
    Vector apply_inverse(const Vector& x) const { return blockwise(inverse, x); }

    LinearOperator op() const
    {
        return [this](const Vector& x) { return apply(x); };
    }

private:
    Vector blockwise(const std::vector<LinearOperator>& ops, const Vector& x) const
    {
        require(x.size() == size(), "block preconditioner: dimension mismatch");
        Vector y(x.size());
        std::size_t off = 0;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            if (sizes[k] == 0)
                continue;
            const Vector xk(x.begin() + static_cast<std::ptrdiff_t>(off),
                            x.begin() + static_cast<std::ptrdiff_t>(off + sizes[k]));
            const Vector yk = ops[k](xk);
            std::copy(yk.begin(), yk.end(), y.begin() + static_cast<std::ptrdiff_t>(off));
            off += sizes[k];
        }
        return y;
    }
};

namespace detail {

inline LinearOperator solve_op(const SparseCholesky& F)
{
    return [&F](const Vector& x) { return F.solve(x); };
}

inline LinearOperator matrix_op(const SparseMatrix& A)
{
    return [&A](const Vector& x) { return A.apply(x); };
}

inline LinearOperator empty_op()
{
    return [](const Vector& x) { return x; };
}

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

} // namespace detail

/// 𝔹 = diag(A⁻¹, H(−½)⁻¹) for the boundary multiplier problem.
inline BlockPreconditioner babuska_preconditioner(const BlockSystem& sys,
                                                  FractionalMode mode = FractionalMode::Exact)
{
    require(sys.kind() == ProblemKind::Babuska, "babuska preconditioner needs the boundary multiplier problem");
    detail::Stopwatch sw;
    BlockPreconditioner P;
    P.kind = PreconditionerKind::BabuskaRiesz;
    P.sizes = sys.block_sizes();
    const SparseCholesky& FU = sys.factors().A_U();
    const FractionalOperator& H = sys.factors().fractional(mode);
    P.solve = {detail::solve_op(FU), detail::empty_op(),
               [&H](const Vector& x) { return H.apply_h_inverse(-0.5, x); }};
    P.inverse = {detail::matrix_op(sys.A_U()), detail::empty_op(),
                 [&H](const Vector& x) { return H.apply_h(-0.5, x); }};
    P.keep_alive.push_back(sys.disc_ptr());
    P.setup_seconds = sw.seconds();
    return P;
}

/// 𝔹_Q = diag(A_U, A_V, ε²H(−½) + H(−1))⁻¹, multiplier block applied as N_Q.
inline BlockPreconditioner qcap_preconditioner(const BlockSystem& sys, FractionalMode mode = FractionalMode::Exact)
{
    require(sys.kind() == ProblemKind::Coupled, "Q-cap preconditioner needs the coupled problem");
    detail::Stopwatch sw;
    BlockPreconditioner P;
    P.kind = PreconditionerKind::Qcap;
    P.sizes = sys.block_sizes();
    const double eps = sys.eps();
    const SparseCholesky& FU = sys.factors().A_U();
    const SparseCholesky& FV = sys.factors().A_V();
    const FractionalOperator& H = sys.factors().fractional(mode);
    P.solve = {detail::solve_op(FU), detail::solve_op(FV), [&H, eps](const Vector& x) { return H.apply_nq(eps, x); }};
    P.inverse = {detail::matrix_op(sys.A_U()), detail::matrix_op(sys.A_V()),
                 [&H, eps](const Vector& x) { return H.apply_nq_inverse(eps, x); }};
    P.keep_alive.push_back(sys.disc_ptr());
    P.setup_seconds = sw.seconds();
    return P;
}

struct WcapOptions {
    /// Replace the two mass solves of the multiplier block by this many Jacobi sweeps (0 = exact).
    int jacobi_sweeps = 0;
};

/// Truncated Jacobi iteration for M x = b started from zero; symmetric and positive
/// definite as a map when the iteration converges.
inline Vector jacobi_mass_solve(const SparseMatrix& M, const Vector& b, int sweeps)
{
    const Vector d = M.diagonal();
    Vector x(b.size(), 0.0);
    for (int s = 0; s < sweeps; ++s) {
        Vector r = b;
        axpy(-1.0, M.apply(x), r);
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] += r[i] / d[i];
    }
    return x;
}

/// 𝔹_W = diag((A_U + ε²TᵀAT)⁻¹, A_V⁻¹, H(−1)⁻¹) with H(−1)⁻¹ = M⁻¹ A M⁻¹.
inline BlockPreconditioner wcap_preconditioner(const BlockSystem& sys, const WcapOptions& opt = {})
{
    require(sys.kind() == ProblemKind::Coupled, "W-cap preconditioner needs the coupled problem");
    detail::Stopwatch sw;
    BlockPreconditioner P;
    P.kind = PreconditionerKind::Wcap;
    P.sizes = sys.block_sizes();
    const double e2 = sys.eps() * sys.eps();
    const SparseMatrix& T = sys.T();
    auto PU = std::make_shared<SparseMatrix>(add(sys.A_U(), multiply(T.transpose(), multiply(sys.A_V(), T)), 1.0, e2));
    PU->set_symmetric_flag(true);
    auto FU = std::make_shared<SparseCholesky>(*PU);
    const SparseCholesky& FV = sys.factors().A_V();
    const SparseCholesky& FM = sys.factors().M_Q();
    const SparseMatrix& A = sys.A_V();
    const SparseMatrix& M = sys.M_Q();
    const int sweeps = opt.jacobi_sweeps;
    LinearOperator mass_solve;
    if (sweeps > 0)
        mass_solve = [&M, sweeps](const Vector& x) { return jacobi_mass_solve(M, x, sweeps); };
    else
        mass_solve = detail::solve_op(FM);
    P.solve = {detail::solve_op(*FU), detail::solve_op(FV),
               [mass_solve, &A](const Vector& x) { return mass_solve(A.apply(mass_solve(x))); }};
    P.inverse = {detail::matrix_op(*PU), detail::matrix_op(sys.A_V()),
                 [&A, &M, &FV](const Vector& x) { return M.apply(FV.solve(M.apply(x))); }};
    if (sweeps > 0) {
        // Inverse of the Jacobi-approximated block is not needed by any analysis route.
        P.inverse[2] = [](const Vector&) -> Vector {
            throw InvalidArgument("W-cap with Jacobi mass solves has no explicit inverse block");
        };
    }
    P.keep_alive = {sys.disc_ptr(), PU, FU};
    P.setup_seconds = sw.seconds();
    return P;
}

/// S = ε² M T A_U⁻¹ Tᵀ M + M A_V⁻¹ M, dense.
inline DenseMatrix schur_complement(const BlockSystem& sys)
{
    require(sys.kind() == ProblemKind::Coupled, "Schur complement is defined for the coupled problem");
    const std::size_t nq = sys.n_Q();
    if (nq > dense_threshold)
        throw TooLargeForDense("Schur complement: multiplier space exceeds the dense threshold");
    const DenseMatrix& X = sys.factors().trace_schur();
    const DenseMatrix M = sys.M_Q().to_dense();
    const SparseCholesky& FV = sys.factors().A_V();
    const DenseMatrix Y = FV.solve(M);
    const double e2 = sys.eps() * sys.eps();
    DenseMatrix S = e2 * (M * X * M) + M * Y;
    for (std::size_t i = 0; i < nq; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double s = 0.5 * (S(i, j) + S(j, i));
            S(i, j) = s;
            S(j, i) = s;
        }
    return S;
}

/// diag(A_U, A_V, S)⁻¹ with S the negative Schur complement.
inline BlockPreconditioner schur_preconditioner(const BlockSystem& sys)
{
    detail::Stopwatch sw;
    BlockPreconditioner P;
    P.kind = PreconditionerKind::Schur;
    P.sizes = sys.block_sizes();
    auto S = std::make_shared<DenseMatrix>(schur_complement(sys));
    auto FS = std::make_shared<DenseCholesky>(*S);
    const SparseCholesky& FU = sys.factors().A_U();
    const SparseCholesky& FV = sys.factors().A_V();
    P.solve = {detail::solve_op(FU), detail::solve_op(FV), [FS](const Vector& x) { return FS->solve(x); }};
    P.inverse = {detail::matrix_op(sys.A_U()), detail::matrix_op(sys.A_V()),
                 [S](const Vector& x) { return S->apply(x); }};
    P.keep_alive = {sys.disc_ptr(), S, FS};
    P.setup_seconds = sw.seconds();
    return P;
}

inline BlockPreconditioner make_preconditioner(const BlockSystem& sys, PreconditionerKind kind,
                                               FractionalMode mode = FractionalMode::Exact)
{
    switch (kind) {
    case PreconditionerKind::Qcap:
        return qcap_preconditioner(sys, mode);
    case PreconditionerKind::Wcap:
        return wcap_preconditioner(sys);
    case PreconditionerKind::Schur:
        return schur_preconditioner(sys);
    case PreconditionerKind::BabuskaRiesz:
        return babuska_preconditioner(sys, mode);
    }
    throw InvalidArgument("unknown preconditioner kind");
}

} // namespace capcon
