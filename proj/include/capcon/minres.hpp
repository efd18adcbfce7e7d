#pragma once

#include "capcon/dense.hpp"
#include "capcon/error.hpp"

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace capcon {

/// Linear map given by its action.
using LinearOperator = std::function<Vector(const Vector&)>;

struct SolveReport {
    std::size_t iterations = 0;
    /// √(rᵀBr) for the initial residual and after every iteration.
    std::vector<double> residual_history;
    bool converged = false;
    Vector solution;
    double setup_seconds = 0.0;
    double solve_seconds = 0.0;
};

struct MinresOptions {
    /// Convergence when rᵀBr < tol.
    double tol = 1e-12;
    std::size_t max_iter = 1000;
    /// Throw NoConvergence instead of returning an unconverged report.
    bool throw_on_max_iter = false;
};

/// Preconditioned minimal residual method for symmetric A and SPD B.
inline SolveReport minres(const LinearOperator& A, const LinearOperator& B, const Vector& b, Vector x,
                          const MinresOptions& opt = {})
{
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = b.size();
    require(x.size() == n, "minres: initial vector has wrong size");

    SolveReport rep;
    Vector r1 = b;
    axpy(-1.0, A(x), r1);
    Vector y = B(r1);
    double beta1sq = dot(r1, y);
    if (beta1sq < 0.0)
        throw Breakdown("minres: preconditioner is not positive definite");
    double beta1 = std::sqrt(beta1sq);
    rep.residual_history.push_back(beta1);

    auto finish = [&](bool ok) {
        rep.converged = ok;
        rep.solution = std::move(x);
        rep.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rep;
    };
    if (beta1sq < opt.tol)
        return finish(true);

    Vector r2 = r1;
    Vector v(n), w(n, 0.0), w1(n, 0.0), w2(n, 0.0);
    double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
    double cs = -1.0, sn = 0.0;
    const double tiny = std::numeric_limits<double>::min();

    for (std::size_t itn = 1; itn <= opt.max_iter; ++itn) {
        const double s = 1.0 / beta;
        for (std::size_t i = 0; i < n; ++i)
            v[i] = s * y[i];
        y = A(v);
        if (itn >= 2)
            axpy(-beta / oldb, r1, y);
        const double alfa = dot(v, y);
        axpy(-alfa / beta, r2, y);
        r1.swap(r2);
        r2 = y;
        y = B(r2);
        oldb = beta;
        const double betasq = dot(r2, y);
        if (betasq < 0.0)
            throw Breakdown("minres: preconditioner is not positive definite");
        beta = std::sqrt(betasq);

        const double oldeps = epsln;
        const double delta = cs * dbar + sn * alfa;
        const double gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        double gamma = std::max(std::hypot(gbar, beta), tiny);
        cs = gbar / gamma;
        sn = beta / gamma;
        const double phi = cs * phibar;
        phibar = sn * phibar;

        w1.swap(w2);
        w2.swap(w);
        const double inv = 1.0 / gamma;
        for (std::size_t i = 0; i < n; ++i)
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * inv;
        axpy(phi, w, x);

        rep.iterations = itn;
        rep.residual_history.push_back(phibar);
        if (phibar * phibar < opt.tol)
            return finish(true);
        if (beta == 0.0) {
            // Krylov space exhausted without reaching the tolerance.
            throw Breakdown("minres: Lanczos breakdown before convergence");
        }
    }
    if (opt.throw_on_max_iter)
        throw NoConvergence("minres: no convergence in " + std::to_string(opt.max_iter) + " iterations");
    return finish(false);
}

} // namespace capcon
