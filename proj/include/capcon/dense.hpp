#pragma once

#include "capcon/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace capcon {

using Vector = std::vector<double>;

inline double dot(const Vector& a, const Vector& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

inline double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

/// y += alpha * x
inline void axpy(double alpha, const Vector& x, Vector& y)
{
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] += alpha * x[i];
}

inline double max_abs_diff(const Vector& a, const Vector& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Row-major dense matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double value = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, value) {}

    static DenseMatrix identity(std::size_t n)
    {
        DenseMatrix I(n, n);
        for (std::size_t i = 0; i < n; ++i)
            I(i, i) = 1.0;
        return I;
    }

    static DenseMatrix diagonal(const Vector& d)
    {
        DenseMatrix D(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i)
            D(i, i) = d[i];
        return D;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    Vector column(std::size_t j) const
    {
        Vector c(rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            c[i] = (*this)(i, j);
        return c;
    }

    void set_column(std::size_t j, const Vector& c)
    {
        for (std::size_t i = 0; i < rows_; ++i)
            (*this)(i, j) = c[i];
    }

    Vector apply(const Vector& x) const
    {
        Vector y(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            const double* r = row(i);
            double s = 0.0;
            for (std::size_t j = 0; j < cols_; ++j)
                s += r[j] * x[j];
            y[i] = s;
        }
        return y;
    }

    /// Aᵀx
    Vector apply_transpose(const Vector& x) const
    {
        Vector y(cols_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            const double* r = row(i);
            const double xi = x[i];
            for (std::size_t j = 0; j < cols_; ++j)
                y[j] += r[j] * xi;
        }
        return y;
    }

    DenseMatrix transpose() const
    {
        DenseMatrix T(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                T(j, i) = (*this)(i, j);
        return T;
    }

    bool all_finite() const
    {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline DenseMatrix operator*(const DenseMatrix& A, const DenseMatrix& B)
{
    require(A.cols() == B.rows(), "matrix product: dimension mismatch");
    DenseMatrix C(A.rows(), B.cols());
    const std::size_t n = B.cols();
    for (std::size_t i = 0; i < A.rows(); ++i) {
        double* c = C.row(i);
        const double* a = A.row(i);
        for (std::size_t k = 0; k < A.cols(); ++k) {
            const double aik = a[k];
            if (aik == 0.0)
                continue;
            const double* b = B.row(k);
            for (std::size_t j = 0; j < n; ++j)
                c[j] += aik * b[j];
        }
    }
    return C;
}

/// AᵀB without forming Aᵀ.
inline DenseMatrix transpose_times(const DenseMatrix& A, const DenseMatrix& B)
{
    require(A.rows() == B.rows(), "transpose product: dimension mismatch");
    DenseMatrix C(A.cols(), B.cols());
    const std::size_t n = B.cols();
    for (std::size_t k = 0; k < A.rows(); ++k) {
        const double* a = A.row(k);
        const double* b = B.row(k);
        for (std::size_t i = 0; i < A.cols(); ++i) {
            const double aki = a[i];
            if (aki == 0.0)
                continue;
            double* c = C.row(i);
            for (std::size_t j = 0; j < n; ++j)
                c[j] += aki * b[j];
        }
    }
    return C;
}

inline DenseMatrix operator+(const DenseMatrix& A, const DenseMatrix& B)
{
    require(A.rows() == B.rows() && A.cols() == B.cols(), "matrix sum: dimension mismatch");
    DenseMatrix C = A;
    for (std::size_t k = 0; k < C.data().size(); ++k)
        C.data()[k] += B.data()[k];
    return C;
}

inline DenseMatrix operator-(const DenseMatrix& A, const DenseMatrix& B)
{
    require(A.rows() == B.rows() && A.cols() == B.cols(), "matrix difference: dimension mismatch");
    DenseMatrix C = A;
    for (std::size_t k = 0; k < C.data().size(); ++k)
        C.data()[k] -= B.data()[k];
    return C;
}

inline DenseMatrix operator*(double s, const DenseMatrix& A)
{
    DenseMatrix C = A;
    for (double& v : C.data())
        v *= s;
    return C;
}

inline double max_abs(const DenseMatrix& A)
{
    double m = 0.0;
    for (double v : A.data())
        m = std::max(m, std::abs(v));
    return m;
}

inline double max_abs_diff(const DenseMatrix& A, const DenseMatrix& B)
{
    return max_abs(A - B);
}

inline double frobenius(const DenseMatrix& A)
{
    double s = 0.0;
    for (double v : A.data())
        s += v * v;
    return std::sqrt(s);
}

inline bool is_symmetric(const DenseMatrix& A, double tol)
{
    if (A.rows() != A.cols())
        return false;
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(A(i, j) - A(j, i)) > tol)
                return false;
    return true;
}

/// Dense Cholesky factor A = L Lᵀ, L stored in the lower triangle.
class DenseCholesky {
public:
    DenseCholesky() = default;

    explicit DenseCholesky(const DenseMatrix& A) : L_(A)
    {
        require(A.rows() == A.cols(), "dense Cholesky: matrix not square");
        const std::size_t n = A.rows();
        for (std::size_t j = 0; j < n; ++j) {
            double* lj = L_.row(j);
            double d = lj[j];
            for (std::size_t k = 0; k < j; ++k)
                d -= lj[k] * lj[k];
            if (!(d > 0.0))
                throw NotSPD("dense Cholesky: nonpositive pivot at row " + std::to_string(j));
            const double djj = std::sqrt(d);
            lj[j] = djj;
            for (std::size_t i = j + 1; i < n; ++i) {
                double* li = L_.row(i);
                double s = li[j];
                for (std::size_t k = 0; k < j; ++k)
                    s -= li[k] * lj[k];
                li[j] = s / djj;
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                L_(i, j) = 0.0;
    }

    std::size_t size() const { return L_.rows(); }
    const DenseMatrix& factor() const { return L_; }

    /// Solves L y = b in place.
    void forward(double* b) const
    {
        const std::size_t n = size();
        for (std::size_t i = 0; i < n; ++i) {
            const double* li = L_.row(i);
            double s = b[i];
            for (std::size_t k = 0; k < i; ++k)
                s -= li[k] * b[k];
            b[i] = s / li[i];
        }
    }

    /// Solves Lᵀ x = y in place.
    void backward(double* y) const
    {
        const std::size_t n = size();
        for (std::size_t i = n; i-- > 0;) {
            y[i] /= L_(i, i);
            const double yi = y[i];
            const double* li = L_.row(i);
            for (std::size_t k = 0; k < i; ++k)
                y[k] -= li[k] * yi;
        }
    }

    Vector solve(Vector b) const
    {
        forward(b.data());
        backward(b.data());
        return b;
    }

    /// Returns L⁻¹ B (columns of B solved independently).
    DenseMatrix forward_columns(const DenseMatrix& B) const
    {
        DenseMatrix X = B;
        const std::size_t n = size();
        const std::size_t m = B.cols();
        for (std::size_t i = 0; i < n; ++i) {
            double* xi = X.row(i);
            const double* li = L_.row(i);
            for (std::size_t k = 0; k < i; ++k) {
                const double lik = li[k];
                if (lik == 0.0)
                    continue;
                const double* xk = X.row(k);
                for (std::size_t j = 0; j < m; ++j)
                    xi[j] -= lik * xk[j];
            }
            const double inv = 1.0 / li[i];
            for (std::size_t j = 0; j < m; ++j)
                xi[j] *= inv;
        }
        return X;
    }

    /// Returns L⁻ᵀ B.
    DenseMatrix backward_columns(const DenseMatrix& B) const
    {
        DenseMatrix X = B;
        const std::size_t n = size();
        const std::size_t m = B.cols();
        for (std::size_t i = n; i-- > 0;) {
            double* xi = X.row(i);
            const double inv = 1.0 / L_(i, i);
            for (std::size_t j = 0; j < m; ++j)
                xi[j] *= inv;
            const double* li = L_.row(i);
            for (std::size_t k = 0; k < i; ++k) {
                const double lik = li[k];
                if (lik == 0.0)
                    continue;
                double* xk = X.row(k);
                for (std::size_t j = 0; j < m; ++j)
                    xk[j] -= lik * xi[j];
            }
        }
        return X;
    }

    DenseMatrix solve(const DenseMatrix& B) const { return backward_columns(forward_columns(B)); }

private:
    DenseMatrix L_;
};

/// Dense LU with partial pivoting, P A = L U.
class DenseLU {
public:
    explicit DenseLU(const DenseMatrix& A) : LU_(A), piv_(A.rows())
    {
        require(A.rows() == A.cols(), "dense LU: matrix not square");
        const std::size_t n = A.rows();
        for (std::size_t i = 0; i < n; ++i)
            piv_[i] = i;
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t p = k;
            for (std::size_t i = k + 1; i < n; ++i)
                if (std::abs(LU_(i, k)) > std::abs(LU_(p, k)))
                    p = i;
            if (LU_(p, k) == 0.0)
                throw Error("dense LU: matrix is singular");
            if (p != k) {
                std::swap_ranges(LU_.row(p), LU_.row(p) + n, LU_.row(k));
                std::swap(piv_[p], piv_[k]);
            }
            const double* uk = LU_.row(k);
            for (std::size_t i = k + 1; i < n; ++i) {
                double* ri = LU_.row(i);
                const double l = ri[k] / uk[k];
                ri[k] = l;
                if (l == 0.0)
                    continue;
                for (std::size_t j = k + 1; j < n; ++j)
                    ri[j] -= l * uk[j];
            }
        }
    }

    Vector solve(const Vector& b) const
    {
        const std::size_t n = LU_.rows();
        Vector x(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = b[piv_[i]];
            const double* r = LU_.row(i);
            for (std::size_t k = 0; k < i; ++k)
                s -= r[k] * x[k];
            x[i] = s;
        }
        for (std::size_t i = n; i-- > 0;) {
            const double* r = LU_.row(i);
            double s = x[i];
            for (std::size_t k = i + 1; k < n; ++k)
                s -= r[k] * x[k];
            x[i] = s / r[i];
        }
        return x;
    }

    DenseMatrix inverse() const
    {
        const std::size_t n = LU_.rows();
        DenseMatrix X(n, n);
        Vector e(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            e[j] = 1.0;
            X.set_column(j, solve(e));
            e[j] = 0.0;
        }
        return X;
    }

private:
    DenseMatrix LU_;
    std::vector<std::size_t> piv_;
};

} // namespace capcon
