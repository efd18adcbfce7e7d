#pragma once

#include "capcon/ordering.hpp"
#include "capcon/sparse.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace capcon {

/// Sparse Cholesky P A Pᵀ = L Lᵀ (up-looking, elimination-tree driven).
/// L is stored by columns with the diagonal first in every column.
class SparseCholesky {
public:
    SparseCholesky() = default;

    explicit SparseCholesky(const SparseMatrix& A) : SparseCholesky(A, nested_dissection(A)) {}

    SparseCholesky(const SparseMatrix& A, std::vector<std::size_t> perm) : n_(A.rows()), perm_(std::move(perm))
    {
        require(A.rows() == A.cols(), "sparse Cholesky: matrix not square");
        require(perm_.size() == n_, "sparse Cholesky: permutation size mismatch");
        inv_perm_.assign(n_, 0);
        for (std::size_t k = 0; k < n_; ++k)
            inv_perm_[perm_[k]] = k;
        build_upper(A);
        symbolic();
        numeric();
    }

    std::size_t size() const { return n_; }
    std::size_t factor_nnz() const { return Li_.size(); }

    Vector solve(const Vector& b) const
    {
        require(b.size() == n_, "sparse Cholesky solve: dimension mismatch");
        Vector x(n_);
        for (std::size_t k = 0; k < n_; ++k)
            x[k] = b[perm_[k]];
        lsolve(x.data());
        ltsolve(x.data());
        Vector y(n_);
        for (std::size_t k = 0; k < n_; ++k)
            y[perm_[k]] = x[k];
        return y;
    }

    /// Solves for every column of a dense right-hand side.
    DenseMatrix solve(const DenseMatrix& B) const
    {
        DenseMatrix X(B.rows(), B.cols());
        for (std::size_t j = 0; j < B.cols(); ++j)
            X.set_column(j, solve(B.column(j)));
        return X;
    }

private:
    // Column k of the permuted upper triangle: entries (i, C(i,k)) with i <= k.
    void build_upper(const SparseMatrix& A)
    {
        std::vector<std::size_t> count(n_ + 1, 0);
        for (std::size_t r = 0; r < n_; ++r)
            for (std::size_t p = A.row_ptr()[r]; p < A.row_ptr()[r + 1]; ++p) {
                const std::size_t i = inv_perm_[r];
                const std::size_t j = inv_perm_[A.col_idx()[p]];
                if (i <= j)
                    ++count[j + 1];
            }
        for (std::size_t k = 0; k < n_; ++k)
            count[k + 1] += count[k];
        Cp_ = count;
        Ci_.resize(Cp_[n_]);
        Cx_.resize(Cp_[n_]);
        std::vector<std::size_t> next(Cp_.begin(), Cp_.end() - 1);
        for (std::size_t r = 0; r < n_; ++r)
            for (std::size_t p = A.row_ptr()[r]; p < A.row_ptr()[r + 1]; ++p) {
                const std::size_t i = inv_perm_[r];
                const std::size_t j = inv_perm_[A.col_idx()[p]];
                if (i <= j) {
                    const std::size_t q = next[j]++;
                    Ci_[q] = i;
                    Cx_[q] = A.values()[p];
                }
            }
    }

    static constexpr std::size_t none = static_cast<std::size_t>(-1);

    // Row pattern of L(k,:) in topological order, written to stack_[top..n).
    std::size_t ereach(std::size_t k, std::vector<std::size_t>& flag) const
    {
        std::size_t top = n_;
        flag[k] = k;
        for (std::size_t p = Cp_[k]; p < Cp_[k + 1]; ++p) {
            std::size_t i = Ci_[p];
            if (i > k)
                continue;
            std::size_t len = 0;
            while (flag[i] != k) {
                path_[len++] = i;
                flag[i] = k;
                i = parent_[i];
            }
            while (len > 0)
                stack_[--top] = path_[--len];
        }
        return top;
    }

    void symbolic()
    {
        parent_.assign(n_, none);
        std::vector<std::size_t> ancestor(n_, none);
        for (std::size_t k = 0; k < n_; ++k)
            for (std::size_t p = Cp_[k]; p < Cp_[k + 1]; ++p) {
                std::size_t i = Ci_[p];
                while (i != none && i < k) {
                    const std::size_t inext = ancestor[i];
                    ancestor[i] = k;
                    if (inext == none)
                        parent_[i] = k;
                    i = inext;
                }
            }
        stack_.assign(n_, 0);
        path_.assign(n_, 0);
        std::vector<std::size_t> flag(n_, none);
        std::vector<std::size_t> colcount(n_, 1);
        for (std::size_t k = 0; k < n_; ++k) {
            const std::size_t top = ereach(k, flag);
            for (std::size_t t = top; t < n_; ++t)
                ++colcount[stack_[t]];
        }
        Lp_.assign(n_ + 1, 0);
        for (std::size_t k = 0; k < n_; ++k)
            Lp_[k + 1] = Lp_[k] + colcount[k];
        Li_.assign(Lp_[n_], 0);
        Lx_.assign(Lp_[n_], 0.0);
    }

    void numeric()
    {
        std::vector<std::size_t> next(Lp_.begin(), Lp_.end() - 1);
        std::vector<std::size_t> flag(n_, none);
        std::vector<double> x(n_, 0.0);
        for (std::size_t k = 0; k < n_; ++k) {
            const std::size_t top = ereach(k, flag);
            x[k] = 0.0;
            for (std::size_t p = Cp_[k]; p < Cp_[k + 1]; ++p)
                if (Ci_[p] <= k)
                    x[Ci_[p]] += Cx_[p];
            double d = x[k];
            x[k] = 0.0;
            for (std::size_t t = top; t < n_; ++t) {
                const std::size_t i = stack_[t];
                const double lki = x[i] / Lx_[Lp_[i]];
                x[i] = 0.0;
                const std::size_t end = next[i];
                for (std::size_t p = Lp_[i] + 1; p < end; ++p)
                    x[Li_[p]] -= Lx_[p] * lki;
                d -= lki * lki;
                const std::size_t q = next[i]++;
                Li_[q] = k;
                Lx_[q] = lki;
            }
            if (!(d > 0.0))
                throw NotSPD("sparse Cholesky: nonpositive pivot at step " + std::to_string(k));
            const std::size_t q = next[k]++;
            Li_[q] = k;
            Lx_[q] = std::sqrt(d);
        }
        Cp_.clear();
        Ci_.clear();
        Cx_.clear();
        Cp_.shrink_to_fit();
        Ci_.shrink_to_fit();
        Cx_.shrink_to_fit();
    }

    void lsolve(double* x) const
    {
        for (std::size_t j = 0; j < n_; ++j) {
            x[j] /= Lx_[Lp_[j]];
            const double xj = x[j];
            for (std::size_t p = Lp_[j] + 1; p < Lp_[j + 1]; ++p)
                x[Li_[p]] -= Lx_[p] * xj;
        }
    }

    void ltsolve(double* x) const
    {
        for (std::size_t j = n_; j-- > 0;) {
            double s = x[j];
            for (std::size_t p = Lp_[j] + 1; p < Lp_[j + 1]; ++p)
                s -= Lx_[p] * x[Li_[p]];
            x[j] = s / Lx_[Lp_[j]];
        }
    }

    std::size_t n_ = 0;
    std::vector<std::size_t> perm_;
    std::vector<std::size_t> inv_perm_;
    std::vector<std::size_t> Cp_, Ci_;
    std::vector<double> Cx_;
    std::vector<std::size_t> parent_;
    mutable std::vector<std::size_t> stack_, path_;
    std::vector<std::size_t> Lp_, Li_;
    std::vector<double> Lx_;
};

} // namespace capcon
