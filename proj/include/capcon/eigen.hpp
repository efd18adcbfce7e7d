#pragma once

#include "capcon/dense.hpp"
#include "capcon/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace capcon {

struct EigenOptions {
    /// Off-diagonal entries below tol * ‖T‖ are treated as zero.
    double tol = 1e-14;
    /// Maximum QL sweeps per eigenvalue.
    int max_sweeps = 50;
};

/// Eigenpairs in ascending order; vectors(i, k) is component i of eigenvector k.
struct EigenDecomposition {
    Vector values;
    DenseMatrix vectors;
};

namespace detail {

// Column-major view over a square buffer.
struct ColMajor {
    std::vector<double>& a;
    std::size_t n;
    double& operator()(std::size_t i, std::size_t j) { return a[j * n + i]; }
};

// Householder reduction of a symmetric matrix to tridiagonal form (EISPACK tred2
// layout). On exit d holds the diagonal, e[1..n) the subdiagonal, and V the
// accumulated orthogonal transform when `vectors` is set.
inline void tred2(std::vector<double>& vbuf, std::size_t n, Vector& d, Vector& e, bool vectors)
{
    ColMajor V{vbuf, n};
    d.assign(n, 0.0);
    e.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        d[j] = V(n - 1, j);

    for (std::size_t i = n - 1; i > 0; --i) {
        double scale = 0.0;
        double h = 0.0;
        for (std::size_t k = 0; k < i; ++k)
            scale += std::abs(d[k]);
        if (scale == 0.0) {
            e[i] = d[i - 1];
            for (std::size_t j = 0; j < i; ++j) {
                d[j] = V(i - 1, j);
                V(i, j) = 0.0;
                V(j, i) = 0.0;
            }
        } else {
            for (std::size_t k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = std::sqrt(h);
            if (f > 0)
                g = -g;
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (std::size_t j = 0; j < i; ++j)
                e[j] = 0.0;

            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                V(j, i) = f;
                g = e[j] + V(j, j) * f;
                double* col = &V(0, j);
                for (std::size_t k = j + 1; k <= i - 1; ++k) {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (std::size_t j = 0; j < i; ++j)
                e[j] -= hh * d[j];
            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                double* col = &V(0, j);
                for (std::size_t k = j; k <= i - 1; ++k)
                    col[k] -= (f * e[k] + g * d[k]);
                d[j] = V(i - 1, j);
                V(i, j) = 0.0;
            }
        }
        d[i] = h;
    }

    if (!vectors) {
        for (std::size_t i = 0; i < n; ++i)
            d[i] = V(i, i);
        e[0] = 0.0;
        return;
    }

    for (std::size_t i = 0; i + 1 < n; ++i) {
        V(n - 1, i) = V(i, i);
        V(i, i) = 1.0;
        const double h = d[i + 1];
        if (h != 0.0) {
            double* ci1 = &V(0, i + 1);
            for (std::size_t k = 0; k <= i; ++k)
                d[k] = ci1[k] / h;
            for (std::size_t j = 0; j <= i; ++j) {
                double* cj = &V(0, j);
                double g = 0.0;
                for (std::size_t k = 0; k <= i; ++k)
                    g += ci1[k] * cj[k];
                for (std::size_t k = 0; k <= i; ++k)
                    cj[k] -= g * d[k];
            }
        }
        for (std::size_t k = 0; k <= i; ++k)
            V(k, i + 1) = 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) {
        d[j] = V(n - 1, j);
        V(n - 1, j) = 0.0;
    }
    V(n - 1, n - 1) = 1.0;
    e[0] = 0.0;
}

// Implicit-shift QL on the tridiagonal (d, e) with e[i] coupling rows i-1 and i.
// Rotations are applied to the columns of V when `vbuf` is non-null.
inline void tql2(Vector& d, Vector& e, std::vector<double>* vbuf, const EigenOptions& opt)
{
    const std::size_t n = d.size();
    if (n == 0)
        return;
    for (std::size_t i = 1; i < n; ++i)
        e[i - 1] = e[i];
    e[n - 1] = 0.0;

    double f = 0.0;
    double tst1 = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        std::size_t m = l;
        while (m < n) {
            if (std::abs(e[m]) <= opt.tol * tst1)
                break;
            ++m;
        }
        if (m == n)
            m = n - 1;
        if (m > l) {
            int iter = 0;
            do {
                if (++iter > opt.max_sweeps)
                    throw NoConvergence("tridiagonal QL: no convergence within sweep cap");
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0)
                    r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (std::size_t i = l + 2; i < n; ++i)
                    d[i] -= h;
                f += h;

                p = d[m];
                double c = 1.0, c2 = 1.0, c3 = 1.0;
                const double el1 = e[l + 1];
                double s = 0.0, s2 = 0.0;
                for (std::size_t i = m; i-- > l;) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = std::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if (vbuf) {
                        double* vi = vbuf->data() + i * n;
                        double* vi1 = vbuf->data() + (i + 1) * n;
                        for (std::size_t k = 0; k < n; ++k) {
                            const double t = vi1[k];
                            vi1[k] = s * vi[k] + c * t;
                            vi[k] = c * vi[k] - s * t;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > opt.tol * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

inline EigenDecomposition sorted(Vector d, const std::vector<double>* vbuf, std::size_t n)
{
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
    EigenDecomposition out;
    out.values.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        out.values[k] = d[idx[k]];
    if (vbuf) {
        out.vectors = DenseMatrix(n, n);
        for (std::size_t k = 0; k < n; ++k) {
            const double* col = vbuf->data() + idx[k] * n;
            for (std::size_t i = 0; i < n; ++i)
                out.vectors(i, k) = col[i];
        }
    }
    return out;
}

} // namespace detail

/// Symmetric eigendecomposition by Householder tridiagonalization and implicit QL.
inline EigenDecomposition sym_eig(const DenseMatrix& A, bool vectors = true, const EigenOptions& opt = {})
{
    require(A.rows() == A.cols(), "sym_eig: matrix not square");
    const std::size_t n = A.rows();
    if (n == 0)
        return {};
    // A is symmetric, so its row-major buffer doubles as the column-major one.
    std::vector<double> vbuf = A.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double s = 0.5 * (vbuf[i * n + j] + vbuf[j * n + i]);
            vbuf[i * n + j] = s;
            vbuf[j * n + i] = s;
        }
    Vector d, e;
    detail::tred2(vbuf, n, d, e, vectors);
    detail::tql2(d, e, vectors ? &vbuf : nullptr, opt);
    return detail::sorted(std::move(d), vectors ? &vbuf : nullptr, n);
}

inline Vector sym_eigenvalues(const DenseMatrix& A, const EigenOptions& opt = {})
{
    return sym_eig(A, false, opt).values;
}

namespace detail {

inline DenseMatrix congruence_inverse(const DenseCholesky& L, const DenseMatrix& A)
{
    // L⁻¹ A L⁻ᵀ = L⁻¹ (L⁻¹ A)ᵀ for symmetric A.
    DenseMatrix C = L.forward_columns(L.forward_columns(A).transpose());
    for (std::size_t i = 0; i < C.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double s = 0.5 * (C(i, j) + C(j, i));
            C(i, j) = s;
            C(j, i) = s;
        }
    return C;
}

} // namespace detail

/// Generalized symmetric-definite problem A u = λ M u with UᵀMU = I.
inline EigenDecomposition sym_gevp_dense(const DenseMatrix& A, const DenseMatrix& M, bool vectors = true,
                                         const EigenOptions& opt = {})
{
    require(A.rows() == M.rows() && A.cols() == M.cols() && A.rows() == A.cols(),
            "sym_gevp_dense: dimension mismatch");
    DenseCholesky L(M);
    EigenDecomposition ed = sym_eig(detail::congruence_inverse(L, A), vectors, opt);
    if (vectors)
        ed.vectors = L.backward_columns(ed.vectors);
    return ed;
}

/// Eigenvalues of the symmetric tridiagonal matrix (diag, offdiag), ascending.
inline Vector tridiag_eigenvalues(const Vector& diag, const Vector& offdiag, const EigenOptions& opt = {})
{
    const std::size_t n = diag.size();
    require(offdiag.size() + 1 == n || (n == 0 && offdiag.empty()), "tridiagonal: offdiag size must be n-1");
    Vector d = diag;
    Vector e(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        e[i] = offdiag[i - 1];
    detail::tql2(d, e, nullptr, opt);
    std::sort(d.begin(), d.end());
    return d;
}

namespace detail {

// Solves (T − λI) x = b for tridiagonal T by Gaussian elimination with partial pivoting.
class ShiftedTridiagonalSolver {
public:
    ShiftedTridiagonalSolver(const Vector& diag, const Vector& off, double lambda, double tiny)
        : n_(diag.size()), d_(n_), du_(off), du2_(n_, 0.0), dl_(off), swap_(n_, false)
    {
        for (std::size_t i = 0; i < n_; ++i)
            d_[i] = diag[i] - lambda;
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            if (std::abs(d_[i]) >= std::abs(dl_[i])) {
                if (d_[i] == 0.0)
                    d_[i] = tiny;
                const double l = dl_[i] / d_[i];
                dl_[i] = l;
                d_[i + 1] -= l * du_[i];
            } else {
                const double l = d_[i] / dl_[i];
                d_[i] = dl_[i];
                dl_[i] = l;
                const double t = du_[i];
                du_[i] = d_[i + 1];
                d_[i + 1] = t - l * d_[i + 1];
                if (i + 2 < n_) {
                    du2_[i] = du_[i + 1];
                    du_[i + 1] = -l * du_[i + 1];
                }
                swap_[i] = true;
            }
        }
        if (d_[n_ - 1] == 0.0)
            d_[n_ - 1] = tiny;
    }

    void solve(Vector& b) const
    {
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            if (swap_[i])
                std::swap(b[i], b[i + 1]);
            b[i + 1] -= dl_[i] * b[i];
        }
        for (std::size_t i = n_; i-- > 0;) {
            double s = b[i];
            if (i + 1 < n_)
                s -= du_[i] * b[i + 1];
            if (i + 2 < n_)
                s -= du2_[i] * b[i + 2];
            b[i] = s / d_[i];
        }
    }

private:
    std::size_t n_;
    Vector d_, du_, du2_, dl_;
    std::vector<bool> swap_;
};

} // namespace detail

/// Symmetric tridiagonal eigenproblem: QL eigenvalues, inverse-iteration eigenvectors
/// with reorthogonalization inside clusters. Falls back to full QL accumulation if an
/// eigenpair residual is not small.
inline EigenDecomposition tridiag_evp(const Vector& diag, const Vector& offdiag, const EigenOptions& opt = {})
{
    const std::size_t n = diag.size();
    EigenDecomposition out;
    out.values = tridiag_eigenvalues(diag, offdiag, opt);
    out.vectors = DenseMatrix(n, n);
    if (n == 0)
        return out;

    double tnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = std::abs(diag[i]);
        if (i > 0)
            r += std::abs(offdiag[i - 1]);
        if (i + 1 < n)
            r += std::abs(offdiag[i]);
        tnorm = std::max(tnorm, r);
    }
    if (tnorm == 0.0) {
        out.vectors = DenseMatrix::identity(n);
        return out;
    }
    const double eps = std::numeric_limits<double>::epsilon();
    const double ortol = 1e-3 * tnorm;
    const double pertol = 10.0 * eps * tnorm;

    auto tri_apply = [&](const Vector& x, Vector& y) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = diag[i] * x[i];
            if (i > 0)
                s += offdiag[i - 1] * x[i - 1];
            if (i + 1 < n)
                s += offdiag[i] * x[i + 1];
            y[i] = s;
        }
    };

    std::vector<Vector> vecs(n);
    std::size_t cluster_start = 0;
    double prev_shift = 0.0;
    Vector tv(n);
    bool ok = true;
    for (std::size_t k = 0; k < n && ok; ++k) {
        double lambda = out.values[k];
        if (k > 0 && out.values[k] - out.values[k - 1] > ortol)
            cluster_start = k;
        if (k > cluster_start && lambda - prev_shift < pertol)
            lambda = prev_shift + pertol;
        prev_shift = lambda;
        detail::ShiftedTridiagonalSolver solver(diag, offdiag, lambda, eps * tnorm);
        Vector x(n);
        for (std::size_t i = 0; i < n; ++i)
            x[i] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i + 1) + 0.3 * static_cast<double>(k));
        for (int it = 0; it < 4; ++it) {
            for (std::size_t j = cluster_start; j < k; ++j)
                axpy(-dot(vecs[j], x), vecs[j], x);
            solver.solve(x);
            for (std::size_t j = cluster_start; j < k; ++j)
                axpy(-dot(vecs[j], x), vecs[j], x);
            const double nx = norm2(x);
            if (!(nx > 0.0) || !std::isfinite(nx)) {
                ok = false;
                break;
            }
            for (double& v : x)
                v /= nx;
        }
        if (!ok)
            break;
        tri_apply(x, tv);
        axpy(-out.values[k], x, tv);
        if (norm2(tv) > 1e-9 * tnorm)
            ok = false;
        vecs[k] = std::move(x);
    }
    if (!ok) {
        std::vector<double> vbuf(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            vbuf[i * n + i] = 1.0;
        Vector d = diag;
        Vector e(n, 0.0);
        for (std::size_t i = 1; i < n; ++i)
            e[i] = offdiag[i - 1];
        detail::tql2(d, e, &vbuf, opt);
        return detail::sorted(std::move(d), &vbuf, n);
    }
    for (std::size_t k = 0; k < n; ++k)
        out.vectors.set_column(k, vecs[k]);
    return out;
}

} // namespace capcon
