#pragma once

#include "capcon/dense.hpp"
#include "capcon/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <tuple>
#include <vector>

namespace capcon {

/// Compressed sparse row matrix with sorted column indices per row.
class SparseMatrix {
public:
    SparseMatrix() : row_ptr_(1, 0) {}
    SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

    SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                 std::vector<std::size_t> col_idx, std::vector<double> values, bool symmetric = false)
        : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
          values_(std::move(values)), symmetric_(symmetric)
    {
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return values_.size(); }

    const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
    const std::vector<std::size_t>& col_idx() const { return col_idx_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    bool symmetric_flag() const { return symmetric_; }
    void set_symmetric_flag(bool s) { symmetric_ = s; }

    double at(std::size_t i, std::size_t j) const
    {
        auto b = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
        auto e = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
        auto it = std::lower_bound(b, e, j);
        if (it != e && *it == j)
            return values_[static_cast<std::size_t>(it - col_idx_.begin())];
        return 0.0;
    }

    void multiply(const double* x, double* y) const
    {
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                s += values_[k] * x[col_idx_[k]];
            y[i] = s;
        }
    }

    Vector apply(const Vector& x) const
    {
        require(x.size() == cols_, "sparse apply: dimension mismatch");
        Vector y(rows_);
        multiply(x.data(), y.data());
        return y;
    }

    Vector apply_transpose(const Vector& x) const
    {
        require(x.size() == rows_, "sparse transpose apply: dimension mismatch");
        Vector y(cols_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                y[col_idx_[k]] += values_[k] * x[i];
        return y;
    }

    SparseMatrix transpose() const
    {
        std::vector<std::size_t> ptr(cols_ + 1, 0);
        for (std::size_t c : col_idx_)
            ++ptr[c + 1];
        for (std::size_t j = 0; j < cols_; ++j)
            ptr[j + 1] += ptr[j];
        std::vector<std::size_t> idx(nnz());
        std::vector<double> val(nnz());
        std::vector<std::size_t> next(ptr.begin(), ptr.end() - 1);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                const std::size_t p = next[col_idx_[k]]++;
                idx[p] = i;
                val[p] = values_[k];
            }
        return SparseMatrix(cols_, rows_, std::move(ptr), std::move(idx), std::move(val), symmetric_);
    }

    DenseMatrix to_dense() const
    {
        DenseMatrix D(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                D(i, col_idx_[k]) += values_[k];
        return D;
    }

    Vector diagonal() const
    {
        Vector d(std::min(rows_, cols_), 0.0);
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] = at(i, i);
        return d;
    }

    /// Checks Aᵀ = A entrywise to an absolute tolerance.
    bool check_symmetric(double tol) const
    {
        if (rows_ != cols_)
            return false;
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                if (std::abs(values_[k] - at(col_idx_[k], i)) > tol)
                    return false;
        return true;
    }

    /// Returns a copy scaled by s.
    SparseMatrix scaled(double s) const
    {
        SparseMatrix B = *this;
        for (double& v : B.values_)
            v *= s;
        return B;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
    bool symmetric_ = false;
};

/// Coordinate-format accumulator; duplicates are summed and exact zeros dropped on finalize.
class TripletBuilder {
public:
    TripletBuilder(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

    void add(std::size_t i, std::size_t j, double v) { entries_.emplace_back(i, j, v); }

    SparseMatrix finalize(bool symmetric = false)
    {
        std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
            return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
        });
        std::vector<std::size_t> ptr(rows_ + 1, 0);
        std::vector<std::size_t> idx;
        std::vector<double> val;
        idx.reserve(entries_.size());
        val.reserve(entries_.size());
        std::size_t k = 0;
        for (std::size_t i = 0; i < rows_; ++i) {
            while (k < entries_.size() && std::get<0>(entries_[k]) == i) {
                const std::size_t j = std::get<1>(entries_[k]);
                require(j < cols_, "triplet column out of range");
                double s = 0.0;
                while (k < entries_.size() && std::get<0>(entries_[k]) == i && std::get<1>(entries_[k]) == j)
                    s += std::get<2>(entries_[k++]);
                if (s != 0.0) {
                    idx.push_back(j);
                    val.push_back(s);
                }
            }
            ptr[i + 1] = idx.size();
        }
        require(k == entries_.size(), "triplet row out of range");
        entries_.clear();
        return SparseMatrix(rows_, cols_, std::move(ptr), std::move(idx), std::move(val), symmetric);
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<std::tuple<std::size_t, std::size_t, double>> entries_;
};

/// alpha A + beta B
inline SparseMatrix add(const SparseMatrix& A, const SparseMatrix& B, double alpha = 1.0, double beta = 1.0)
{
    require(A.rows() == B.rows() && A.cols() == B.cols(), "sparse add: dimension mismatch");
    TripletBuilder t(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.rows(); ++i) {
        for (std::size_t k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k)
            t.add(i, A.col_idx()[k], alpha * A.values()[k]);
        for (std::size_t k = B.row_ptr()[i]; k < B.row_ptr()[i + 1]; ++k)
            t.add(i, B.col_idx()[k], beta * B.values()[k]);
    }
    return t.finalize(A.symmetric_flag() && B.symmetric_flag());
}

/// Sparse product A B.
inline SparseMatrix multiply(const SparseMatrix& A, const SparseMatrix& B)
{
    require(A.cols() == B.rows(), "sparse product: dimension mismatch");
    std::vector<std::size_t> ptr(A.rows() + 1, 0);
    std::vector<std::size_t> idx;
    std::vector<double> val;
    std::vector<double> acc(B.cols(), 0.0);
    std::vector<std::size_t> mark(B.cols(), static_cast<std::size_t>(-1));
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < A.rows(); ++i) {
        cols.clear();
        for (std::size_t ka = A.row_ptr()[i]; ka < A.row_ptr()[i + 1]; ++ka) {
            const std::size_t k = A.col_idx()[ka];
            const double a = A.values()[ka];
            for (std::size_t kb = B.row_ptr()[k]; kb < B.row_ptr()[k + 1]; ++kb) {
                const std::size_t j = B.col_idx()[kb];
                if (mark[j] != i) {
                    mark[j] = i;
                    acc[j] = 0.0;
                    cols.push_back(j);
                }
                acc[j] += a * B.values()[kb];
            }
        }
        std::sort(cols.begin(), cols.end());
        for (std::size_t j : cols)
            if (acc[j] != 0.0) {
                idx.push_back(j);
                val.push_back(acc[j]);
            }
        ptr[i + 1] = idx.size();
    }
    return SparseMatrix(A.rows(), B.cols(), std::move(ptr), std::move(idx), std::move(val));
}

inline SparseMatrix sparse_identity(std::size_t n)
{
    TripletBuilder t(n, n);
    for (std::size_t i = 0; i < n; ++i)
        t.add(i, i, 1.0);
    return t.finalize(true);
}

inline SparseMatrix sparse_from_dense(const DenseMatrix& D, bool symmetric = false)
{
    TripletBuilder t(D.rows(), D.cols());
    for (std::size_t i = 0; i < D.rows(); ++i)
        for (std::size_t j = 0; j < D.cols(); ++j)
            if (D(i, j) != 0.0)
                t.add(i, j, D(i, j));
    return t.finalize(symmetric);
}

/// Vector of uniform [0,1) samples from a seeded generator.
inline Vector random_vector(std::size_t n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Vector v(n);
    for (double& x : v)
        x = dist(rng);
    return v;
}

} // namespace capcon
