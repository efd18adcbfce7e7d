#pragma once

#include "capcon/cholesky.hpp"
#include "capcon/eigen.hpp"
#include "capcon/sparse.hpp"

#include <cmath>
#include <cstddef>
#include <string>

namespace capcon {

/// Largest problem the dense eigensolver paths accept.
inline constexpr std::size_t dense_threshold = 5000;

enum class FractionalMode { Exact, Lumped };

/// Eigenpairs of A u = λ M u with UᵀMU = I, and the fractional matrices
/// H(s) = (MU) Λ^s (MU)ᵀ built from them.
class FractionalOperator {
    struct NqWeight {
        double e2;
        double operator()(double l) const { return 1.0 / (e2 / std::sqrt(l) + 1.0 / l); }
    };
    static NqWeight nq_weight(double eps) { return {eps * eps}; }

public:
    FractionalOperator(DenseMatrix U, Vector lambda, DenseMatrix M, FractionalMode mode)
        : U_(std::move(U)), lambda_(std::move(lambda)), M_(std::move(M)), mode_(mode), MU_(M_ * U_), W_(U_)
    {
        check();
    }

    /// Explicit bases: H(s) = F Λ^s Fᵀ and H(s)⁻¹ = W Λ^{−s} Wᵀ, with WᵀF = I.
    FractionalOperator(DenseMatrix U, Vector lambda, DenseMatrix M, FractionalMode mode, DenseMatrix F, DenseMatrix W)
        : U_(std::move(U)), lambda_(std::move(lambda)), M_(std::move(M)), mode_(mode), MU_(std::move(F)),
          W_(std::move(W))
    {
        check();
    }

    std::size_t size() const { return lambda_.size(); }
    const DenseMatrix& U() const { return U_; }
    const Vector& lambda() const { return lambda_; }
    const DenseMatrix& M() const { return M_; }
    FractionalMode mode() const { return mode_; }

    /// H(s) as a dense matrix.
    DenseMatrix hmat(double s) const { return spectral(MU_, [s](double l) { return std::pow(l, s); }); }

    /// H(s)⁻¹ = U Λ^{-s} Uᵀ.
    DenseMatrix hmat_inverse(double s) const { return spectral(W_, [s](double l) { return std::pow(l, -s); }); }

    Vector apply_h(double s, const Vector& x) const
    {
        return spectral_apply(MU_, x, [s](double l) { return std::pow(l, s); });
    }

    Vector apply_h_inverse(double s, const Vector& x) const
    {
        return spectral_apply(W_, x, [s](double l) { return std::pow(l, -s); });
    }

    /// N_Q = (ε²H(−½) + H(−1))⁻¹ = U [ε²Λ^{−½} + Λ^{−1}]⁻¹ Uᵀ.
    DenseMatrix nq_matrix(double eps) const { return spectral(W_, nq_weight(eps)); }

    Vector apply_nq(double eps, const Vector& x) const { return spectral_apply(W_, x, nq_weight(eps)); }

    /// ε²H(−½) + H(−1), the matrix N_Q inverts.
    DenseMatrix nq_inverse_matrix(double eps) const
    {
        const double e2 = eps * eps;
        return spectral(MU_, [e2](double l) { return e2 / std::sqrt(l) + 1.0 / l; });
    }

    Vector apply_nq_inverse(double eps, const Vector& x) const
    {
        const double e2 = eps * eps;
        return spectral_apply(MU_, x, [e2](double l) { return e2 / std::sqrt(l) + 1.0 / l; });
    }

private:
    void check() const
    {
        for (double l : lambda_)
            if (!(l > 0.0))
                throw NotSPD("fractional operator: nonpositive eigenvalue");
    }

    // W diag(w(λ)) Wᵀ
    template <class F>
    DenseMatrix spectral(const DenseMatrix& W, F w) const
    {
        const std::size_t n = size();
        DenseMatrix WD = W;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                WD(i, k) *= w(lambda_[k]);
        DenseMatrix H = WD * W.transpose();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j) {
                const double s = 0.5 * (H(i, j) + H(j, i));
                H(i, j) = s;
                H(j, i) = s;
            }
        return H;
    }

    template <class F>
    Vector spectral_apply(const DenseMatrix& W, const Vector& x, F w) const
    {
        Vector c = W.apply_transpose(x);
        for (std::size_t k = 0; k < c.size(); ++k)
            c[k] *= w(lambda_[k]);
        return W.apply(c);
    }

    DenseMatrix U_;
    Vector lambda_;
    DenseMatrix M_;
    FractionalMode mode_;
    DenseMatrix MU_;
    DenseMatrix W_;
};

/// Full generalized eigendecomposition of the pencil (A, M).
inline FractionalOperator build_fractional(const SparseMatrix& A, const SparseMatrix& M, const EigenOptions& opt = {})
{
    require(A.rows() == M.rows() && A.rows() == A.cols() && M.rows() == M.cols(), "fractional: dimension mismatch");
    if (A.rows() > dense_threshold)
        throw TooLargeForDense("fractional: " + std::to_string(A.rows()) + " unknowns exceed the dense threshold");
    const DenseMatrix Md = M.to_dense();
    auto ed = sym_gevp_dense(A.to_dense(), Md, true, opt);
    return FractionalOperator(std::move(ed.vectors), std::move(ed.values), Md, FractionalMode::Exact);
}

/// Row sums of M.
inline Vector lumped_mass(const SparseMatrix& M)
{
    Vector d(M.rows(), 0.0);
    for (std::size_t i = 0; i < M.rows(); ++i)
        for (std::size_t k = M.row_ptr()[i]; k < M.row_ptr()[i + 1]; ++k)
            d[i] += M.values()[k];
    return d;
}

/// Eigenpairs of (A, M_l) with M_l the lumped mass, through the symmetric tridiagonal
/// matrix M_l^{−½} A M_l^{−½}. A must be tridiagonal in its dof ordering.
inline FractionalOperator build_fractional_lumped(const SparseMatrix& A, const SparseMatrix& M,
                                                  const EigenOptions& opt = {})
{
    require(A.rows() == M.rows() && A.rows() == A.cols(), "fractional: dimension mismatch");
    const std::size_t n = A.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k) {
            const std::size_t j = A.col_idx()[k];
            if ((j > i ? j - i : i - j) > 1)
                throw NotTridiagonal("lumped fractional path needs a tridiagonal stiffness matrix");
        }
    const Vector ml = lumped_mass(M);
    Vector scale(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(ml[i] > 0.0))
            throw NotSPD("lumped mass has a nonpositive entry");
        scale[i] = 1.0 / std::sqrt(ml[i]);
    }
    Vector diag(n), off(n > 0 ? n - 1 : 0);
    for (std::size_t i = 0; i < n; ++i) {
        diag[i] = A.at(i, i) * scale[i] * scale[i];
        if (i + 1 < n)
            off[i] = A.at(i, i + 1) * scale[i] * scale[i + 1];
    }
    auto ed = tridiag_evp(diag, off, opt);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            ed.vectors(i, k) *= scale[i];
    return FractionalOperator(std::move(ed.vectors), std::move(ed.values), DenseMatrix::diagonal(ml),
                              FractionalMode::Lumped);
}

/// Lumped eigenpairs paired with the consistent mass M on the outside:
/// H(s) = (MU) Λ^s (MU)ᵀ with U the M_l-orthonormal eigenvectors, so H(−1) = M A⁻¹ M exactly.
inline FractionalOperator rebase_on_mass(const FractionalOperator& L, const SparseMatrix& M)
{
    require(L.mode() == FractionalMode::Lumped, "rebase_on_mass needs a lumped operator");
    const std::size_t n = L.size();
    const SparseCholesky FM(M);
    DenseMatrix F(n, n), W(n, n);
    Vector col(n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i)
            col[i] = L.U()(i, k);
        F.set_column(k, M.apply(col));
        for (std::size_t i = 0; i < n; ++i)
            col[i] *= L.M()(i, i);
        W.set_column(k, FM.solve(col));
    }
    return FractionalOperator(L.U(), L.lambda(), M.to_dense(), FractionalMode::Lumped, std::move(F), std::move(W));
}

} // namespace capcon
