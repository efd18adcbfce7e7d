#include "capcon/capcon.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace capcon;

namespace {

constexpr double pi = std::numbers::pi;
const double golden_minus = 0.5 - 0.5 * std::sqrt(5.0);
const double golden_plus = 0.5 + 0.5 * std::sqrt(5.0);
const std::vector<double> all_eps = {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};

// Row label of the printed tables to (mesh, coupling) under the table convention.
BlockSystem table_system(std::size_t size, double eps)
{
    return BlockSystem(discretize_coupled(mesh_for_size(size, TableConvention::Table)),
                       coupling_eps(eps, TableConvention::Table));
}

double qcap_kappa(const BlockSystem& sys) { return condition_number(sys, qcap_preconditioner(sys)).kappa; }
double wcap_kappa(const BlockSystem& sys) { return condition_number(sys, wcap_preconditioner(sys)).kappa; }

Vector block(const Vector& x, std::size_t off, std::size_t len)
{
    return Vector(x.begin() + static_cast<std::ptrdiff_t>(off), x.begin() + static_cast<std::ptrdiff_t>(off + len));
}

} // namespace

TEST(BlockSystem, SizesOnTenByTen)
{
    const BlockSystem sys = build_coupled(10, 1.0);
    EXPECT_EQ(sys.size(), 99u);
    EXPECT_EQ(sys.n_Q(), 9u);
    EXPECT_EQ(sys.n_U(), 81u);
    EXPECT_EQ(sys.n_V(), 9u);
    EXPECT_EQ(coupled_size(10), 99u);
}

TEST(BlockSystem, ApplyIsSymmetric)
{
    std::mt19937_64 rng(11);
    for (double eps : {1e-3, 1.0, 1e3}) {
        const BlockSystem sys = build_coupled(12, eps);
        for (int k = 0; k < 10; ++k) {
            const Vector x = random_vector(sys.size(), rng);
            const Vector y = random_vector(sys.size(), rng);
            const double a = dot(y, sys.apply(x)), b = dot(x, sys.apply(y));
            EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a)));
        }
    }
}

TEST(BlockSystem, MultiplierBlockIsZero)
{
    const BlockSystem sys = build_coupled(8, 0.3);
    const DenseMatrix D = sys.to_dense();
    const std::size_t off = sys.n_W();
    for (std::size_t i = off; i < sys.size(); ++i)
        for (std::size_t j = off; j < sys.size(); ++j)
            EXPECT_EQ(D(i, j), 0.0);
    EXPECT_TRUE(is_symmetric(D, 1e-13));
}

TEST(BlockSystem, ConstraintRowVanishesOnKernel)
{
    std::mt19937_64 rng(5);
    const double eps = 0.7;
    const BlockSystem sys = build_coupled(14, eps);
    Vector x = random_vector(sys.size(), rng);
    const Vector u = block(x, 0, sys.n_U());
    const Vector tu = sys.T().apply(u);
    for (std::size_t i = 0; i < sys.n_V(); ++i)
        x[sys.n_U() + i] = eps * tu[i];
    const Vector y = sys.apply(x);
    for (double v : block(y, sys.n_W(), sys.n_Q()))
        EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(BlockSystem, InterpolatedManufacturedTripleSatisfiesConstraint)
{
    for (double eps : {1e-2, 1.0, 1e2}) {
        const BlockSystem sys = build_coupled(16, eps);
        const Discretization& d = sys.disc();
        const ManufacturedSolution ms{eps};
        Vector x(sys.size(), 0.0);
        for (std::size_t k = 0; k < sys.n_U(); ++k) {
            const Point& p = d.mesh.vertices[d.maps.U.dof_to_global[k]];
            x[k] = ms.u(p.x, p.y);
        }
        for (std::size_t k = 0; k < sys.n_V(); ++k) {
            const Point& p = d.mesh.vertices[d.maps.V.dof_to_global[k]];
            x[sys.n_U() + k] = ms.v(p.y);
            x[sys.n_W() + k] = ms.p(p.y);
        }
        const Vector y = sys.apply(x);
        for (double v : block(y, sys.n_W(), sys.n_Q()))
            EXPECT_NEAR(v, 0.0, 1e-13) << eps;
    }
}

TEST(BlockSystem, RejectsNonpositiveCoupling)
{
    auto d = discretize_coupled(4);
    EXPECT_THROW(BlockSystem(d, 0.0), InvalidArgument);
    EXPECT_THROW(BlockSystem(d, -1.0), InvalidArgument);
}

TEST(Preconditioners, PositiveDefiniteForEveryKind)
{
    std::mt19937_64 rng(17);
    auto d = discretize_coupled(10);
    for (double eps : all_eps) {
        const BlockSystem sys(d, eps);
        for (auto kind : {PreconditionerKind::Qcap, PreconditionerKind::Wcap, PreconditionerKind::Schur}) {
            const BlockPreconditioner P = make_preconditioner(sys, kind);
            EXPECT_EQ(P.kind, kind);
            for (int k = 0; k < 100; ++k) {
                Vector x = random_vector(sys.size(), rng);
                for (double& v : x)
                    v -= 0.5;
                EXPECT_GT(dot(x, P.apply(x)), 0.0) << to_string(kind) << " eps " << eps;
            }
        }
        const BlockPreconditioner L = qcap_preconditioner(sys, FractionalMode::Lumped);
        for (int k = 0; k < 100; ++k) {
            Vector x = random_vector(sys.size(), rng);
            for (double& v : x)
                v -= 0.5;
            EXPECT_GT(dot(x, L.apply(x)), 0.0);
        }
    }
    const BlockSystem bab(discretize_babuska(8), 1.0);
    for (auto mode : {FractionalMode::Exact, FractionalMode::Lumped}) {
        const BlockPreconditioner P = babuska_preconditioner(bab, mode);
        for (int k = 0; k < 100; ++k) {
            Vector x = random_vector(bab.size(), rng);
            for (double& v : x)
                v -= 0.5;
            EXPECT_GT(dot(x, P.apply(x)), 0.0);
        }
    }
}

TEST(Preconditioners, ActBlockwise)
{
    const BlockSystem sys = build_coupled(8, 2.0);
    const BlockPreconditioner P = qcap_preconditioner(sys);
    Vector x(sys.size(), 0.0);
    for (std::size_t i = 0; i < sys.n_U(); ++i)
        x[i] = 1.0;
    const Vector y = P.apply(x);
    for (std::size_t i = sys.n_U(); i < sys.size(); ++i)
        EXPECT_EQ(y[i], 0.0);
    const Vector back = P.apply_inverse(y);
    EXPECT_LT(max_abs_diff(back, x), 1e-12);
}

TEST(Preconditioners, SolveAndInverseBlocksAgree)
{
    std::mt19937_64 rng(23);
    const BlockSystem sys = build_coupled(10, 0.5);
    for (auto kind : {PreconditionerKind::Qcap, PreconditionerKind::Wcap, PreconditionerKind::Schur}) {
        const BlockPreconditioner P = make_preconditioner(sys, kind);
        const Vector x = random_vector(sys.size(), rng);
        EXPECT_LT(max_abs_diff(P.apply(P.apply_inverse(x)), x), 1e-9) << to_string(kind);
    }
}

TEST(Babuska, ConditionNumbersAcrossMeshes)
{
    for (std::size_t n : {8u, 16u, 32u}) {
        const BlockSystem sys(discretize_babuska(n), 1.0);
        EXPECT_EQ(sys.size(), babuska_size(n));
        const SpectrumReport r = condition_number(sys, babuska_preconditioner(sys));
        EXPECT_NEAR(r.abs_min, 0.311, 0.311 * 0.01) << n;
        EXPECT_NEAR(r.abs_max, 1.750, 1.750 * 0.01) << n;
        EXPECT_NEAR(r.kappa, 5.622, 0.01) << n;
    }
}

TEST(Babuska, IterationsBoundedAndFlat)
{
    SolveSettings s;
    s.tol = 1e-10;
    const auto cells = run_babuska_iterations({8, 16, 32, 64, 128}, s);
    std::size_t lo = 1000, hi = 0;
    for (const auto& c : cells) {
        EXPECT_TRUE(c.converged) << c.n;
        EXPECT_LE(c.iterations, 48u) << c.n;
        lo = std::min(lo, c.iterations);
        hi = std::max(hi, c.iterations);
    }
    EXPECT_LE(hi - lo, 5u);
}

TEST(Qcap, ConditionNumbersOnSmallestRow)
{
    EXPECT_NEAR(qcap_kappa(table_system(99, 1.0)), 6.979, 6.979 * 0.01);
    EXPECT_NEAR(qcap_kappa(table_system(99, 1e-3)), 2.655, 2.655 * 0.01);
    // Small coupling approaches the Schur-type limit (1+√5)/(√5−1).
    EXPECT_NEAR(qcap_kappa(table_system(99, 1e-3)), (1.0 + std::sqrt(5.0)) / (std::sqrt(5.0) - 1.0), 0.05);
}

TEST(Qcap, ConditionNumberOnLargestRow) { EXPECT_NEAR(qcap_kappa(table_system(4355, 1e3)), 7.843, 7.843 * 0.01); }

TEST(Qcap, IterationsOnFineMesh)
{
    const BlockSystem sys = table_system(66563, 1.0);
    ASSERT_EQ(sys.size(), coupled_size(256));
    const SolveReport r = solve_system(sys, qcap_preconditioner(sys), manufactured_rhs(sys), {});
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.iterations, 37u);
}

TEST(Wcap, ConditionNumbers)
{
    EXPECT_NEAR(wcap_kappa(table_system(99, 1.0)), 3.615, 3.615 * 0.01);
    EXPECT_NEAR(wcap_kappa(table_system(99, 1e-3)), 2.619, 2.619 * 0.01);
    EXPECT_NEAR(wcap_kappa(table_system(4355, 1e3)), 4.049, 4.049 * 0.01);
}

TEST(Wcap, KernelReducedPrimalBlock)
{
    // Z = [I; εT] spans the kernel of [B_U, B_V]; ZᵀDZ with D = diag(A_U, A_V) is the first W-cap block.
    const double eps = 0.8;
    const BlockSystem sys = build_coupled(4, eps);
    const DenseMatrix T = sys.T().to_dense();
    const std::size_t nu = sys.n_U(), nv = sys.n_V();
    DenseMatrix Z(nu + nv, nu);
    for (std::size_t i = 0; i < nu; ++i)
        Z(i, i) = 1.0;
    for (std::size_t i = 0; i < nv; ++i)
        for (std::size_t j = 0; j < nu; ++j)
            Z(nu + i, j) = eps * T(i, j);
    DenseMatrix D(nu + nv, nu + nv), B(sys.n_Q(), nu + nv);
    const DenseMatrix AU = sys.A_U().to_dense(), AV = sys.A_V().to_dense();
    const DenseMatrix BU = sys.B_U().to_dense(), BV = sys.B_V().to_dense();
    for (std::size_t i = 0; i < nu; ++i)
        for (std::size_t j = 0; j < nu; ++j)
            D(i, j) = AU(i, j);
    for (std::size_t i = 0; i < nv; ++i)
        for (std::size_t j = 0; j < nv; ++j)
            D(nu + i, nu + j) = AV(i, j);
    for (std::size_t i = 0; i < sys.n_Q(); ++i) {
        for (std::size_t j = 0; j < nu; ++j)
            B(i, j) = BU(i, j);
        for (std::size_t j = 0; j < nv; ++j)
            B(i, nu + j) = BV(i, j);
    }
    EXPECT_LT(max_abs(B * Z), 1e-15);
    const DenseMatrix ZDZ = transpose_times(Z, D * Z);
    const DenseMatrix PU = AU + (eps * eps) * transpose_times(T, AV * T);
    EXPECT_LT(max_abs_diff(ZDZ, PU), 1e-10);

    const BlockPreconditioner P = wcap_preconditioner(sys);
    std::mt19937_64 rng(3);
    const Vector x = random_vector(nu, rng);
    EXPECT_LT(max_abs_diff(P.inverse[0](x), PU.apply(x)), 1e-12);

    // B_V A_V⁻¹ B_Vᵀ = M A⁻¹ M = H(−1), the multiplier block W-cap inverts.
    const DenseMatrix BAB = BV * DenseLU(AV).inverse() * BV.transpose();
    const DenseMatrix H = build_fractional(sys.A_V(), sys.M_Q()).hmat(-1.0);
    EXPECT_LT(max_abs_diff(BAB, H), 1e-10);
    const Vector q = random_vector(sys.n_Q(), rng);
    EXPECT_LT(max_abs_diff(P.inverse[2](q), H.apply(q)), 1e-12);
}

TEST(Wcap, JacobiMassSolves)
{
    const BlockSystem sys = build_coupled(16, 1.0);
    WcapOptions opt;
    opt.jacobi_sweeps = 30;
    const BlockPreconditioner J = wcap_preconditioner(sys, opt);
    const BlockPreconditioner E = wcap_preconditioner(sys);
    std::mt19937_64 rng(9);
    const Vector q = random_vector(sys.n_Q(), rng);
    const Vector a = J.solve[2](q), b = E.solve[2](q);
    Vector diff = a;
    axpy(-1.0, b, diff);
    EXPECT_LT(norm2(diff), 1e-6 * norm2(b));
    EXPECT_THROW(J.inverse[2](q), InvalidArgument);
    const SolveReport r = solve_system(sys, J, manufactured_rhs(sys), {});
    EXPECT_TRUE(r.converged);
    const SolveReport s = solve_system(sys, E, manufactured_rhs(sys), {});
    EXPECT_LE(std::abs(double(r.iterations) - double(s.iterations)), 5.0);
}

TEST(Schur, SpectrumHasThreePoints)
{
    auto d = discretize_coupled(10);
    for (double eps : {1e-2, 1.0, 1e2}) {
        const BlockSystem sys(d, eps);
        const Vector ev = generalized_spectrum(sys, schur_preconditioner(sys));
        for (double l : ev) {
            const double dist =
                std::min({std::abs(l - 1.0), std::abs(l - golden_minus), std::abs(l - golden_plus)});
            EXPECT_LT(dist, 1e-8) << "eps " << eps << " lambda " << l;
        }
    }
}

TEST(Schur, MinresConvergesInFewIterations)
{
    auto d = discretize_coupled(10);
    for (double eps : {1e-2, 1.0, 1e2}) {
        const BlockSystem sys(d, eps);
        const SolveReport r = solve_system(sys, schur_preconditioner(sys), manufactured_rhs(sys), {});
        EXPECT_TRUE(r.converged);
        EXPECT_LE(r.iterations, 5u) << eps;
    }
}

TEST(Schur, ComplementMatchesDenseFormula)
{
    const BlockSystem sys = build_coupled(6, 0.4);
    const DenseMatrix BU = sys.B_U().to_dense(), BV = sys.B_V().to_dense();
    const DenseMatrix S = BU * DenseLU(sys.A_U().to_dense()).inverse() * BU.transpose() +
                          BV * DenseLU(sys.A_V().to_dense()).inverse() * BV.transpose();
    EXPECT_LT(max_abs_diff(schur_complement(sys), S), 1e-12 * max_abs(S));
}

TEST(Schur, SmallCouplingLimit)
{
    const BlockSystem sys = build_coupled(10, 1e-4);
    const DenseMatrix S = schur_complement(sys);
    const DenseMatrix H = build_fractional(sys.A_V(), sys.M_Q()).hmat(-1.0);
    EXPECT_LT(frobenius(S - H) / frobenius(H), 1e-4);
}

TEST(Schur, SpectralEquivalenceWithMultiplierBlock)
{
    // Eigenvalues of (S, N_Q⁻¹) lie in [min(1, c₁), √(1 + c₂²)] with c₁, c₂ from the trace pencil on the same mesh.
    for (std::size_t n : {8u, 16u, 32u}) {
        auto d = discretize_coupled(n);
        const auto [c1, c2] = trace_pencil_extremes(*d);
        const double C1 = std::min(1.0, c1), C2 = std::sqrt(1.0 + c2 * c2);
        for (double eps : all_eps) {
            const BlockSystem sys(d, eps);
            const Vector ev = schur_nq_pencil(sys);
            EXPECT_GE(ev.front(), C1 * (1.0 - 1e-10)) << n << " " << eps;
            EXPECT_LE(ev.back(), C2 * (1.0 + 1e-10)) << n << " " << eps;
        }
    }
}

TEST(Manufactured, DiscreteSolutionApproachesInterpolant)
{
    // Nodal error of u halves at least with every refinement.
    const double eps = 1.0;
    double prev = 0.0;
    for (std::size_t n : {8u, 16u, 32u}) {
        const BlockSystem sys = build_coupled(n, eps);
        const SolveReport r = solve_system(sys, qcap_preconditioner(sys), manufactured_rhs(sys), {});
        ASSERT_TRUE(r.converged);
        const Discretization& d = sys.disc();
        double err = 0.0;
        for (std::size_t k = 0; k < sys.n_U(); ++k) {
            const Point& p = d.mesh.vertices[d.maps.U.dof_to_global[k]];
            err = std::max(err, std::abs(r.solution[k] - std::sin(pi * p.x) * std::sin(pi * p.y)));
        }
        if (prev > 0.0)
            EXPECT_LT(err, 0.5 * prev) << n;
        prev = err;
    }
}
