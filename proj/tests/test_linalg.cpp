#include "capcon/capcon.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace capcon;

namespace {

// Gaussian elimination with partial pivoting on a dense copy.
Vector gauss_solve(DenseMatrix A, Vector b)
{
    const std::size_t n = A.rows();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(A(i, k)) > std::abs(A(p, k)))
                p = i;
        for (std::size_t j = 0; j < n; ++j)
            std::swap(A(k, j), A(p, j));
        std::swap(b[k], b[p]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = A(i, k) / A(k, k);
            for (std::size_t j = k; j < n; ++j)
                A(i, j) -= f * A(k, j);
            b[i] -= f * b[k];
        }
    }
    Vector x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j)
            s -= A(i, j) * x[j];
        x[i] = s / A(i, i);
    }
    return x;
}

DenseMatrix random_spd(std::size_t n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    DenseMatrix G(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            G(i, j) = U(rng);
    DenseMatrix A = transpose_times(G, G);
    for (std::size_t i = 0; i < n; ++i)
        A(i, i) += 0.5 * double(n);
    return A;
}

// Number of eigenvalues of the tridiagonal pencil (A, M) below x, from the inertia of A − xM.
std::size_t count_below(const SparseMatrix& A, const SparseMatrix& M, double x)
{
    const std::size_t n = A.rows();
    std::size_t neg = 0;
    double d = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        double piv = A.at(k, k) - x * M.at(k, k);
        if (k > 0) {
            const double off = A.at(k, k - 1) - x * M.at(k, k - 1);
            piv -= off * off / d;
        }
        if (piv == 0.0)
            piv = -1e-300;
        neg += piv < 0.0;
        d = piv;
    }
    return neg;
}

double bisect_eigenvalue(const SparseMatrix& A, const SparseMatrix& M, std::size_t k, double lo, double hi)
{
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (count_below(A, M, mid) > k)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

SparseMatrix grid_laplacian(std::size_t n)
{
    const Mesh2D mesh = build_unit_square_mesh(n);
    const DofMaps maps = build_dof_maps(mesh, embed_midline(mesh), BoundaryConditions::Coupled);
    return assemble_stiffness_2d(mesh, maps.U);
}

} // namespace

// ---------------------------------------------------------------------------
// Sparse storage

TEST(Sparse, TripletBuilderSumsDuplicatesAndDropsZeros)
{
    TripletBuilder tb(3, 3);
    tb.add(0, 0, 1.0);
    tb.add(0, 0, 2.0);
    tb.add(1, 2, 5.0);
    tb.add(2, 1, 1.0);
    tb.add(2, 1, -1.0);
    const SparseMatrix A = tb.finalize();
    EXPECT_EQ(A.nnz(), 2u);
    EXPECT_EQ(A.at(0, 0), 3.0);
    EXPECT_EQ(A.at(1, 2), 5.0);
    EXPECT_EQ(A.at(2, 1), 0.0);
}

TEST(Sparse, ProductsMatchDense)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    DenseMatrix Ad(7, 5), Bd(5, 6);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            Ad(i, j) = (i + j) % 3 ? 0.0 : U(rng);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 6; ++j)
            Bd(i, j) = (i * j) % 2 ? 0.0 : U(rng);
    const SparseMatrix A = sparse_from_dense(Ad), B = sparse_from_dense(Bd);
    EXPECT_LT(max_abs_diff(multiply(A, B).to_dense(), Ad * Bd), 1e-14);
    EXPECT_EQ(max_abs_diff(A.transpose().to_dense(), Ad.transpose()), 0.0);
    const Vector x = random_vector(5, rng);
    EXPECT_LT(max_abs_diff(A.apply(x), Ad.apply(x)), 1e-14);
    const Vector y = random_vector(7, rng);
    EXPECT_LT(max_abs_diff(A.apply_transpose(y), Ad.apply_transpose(y)), 1e-14);
    const SparseMatrix C = add(A, A, 2.0, -0.5);
    EXPECT_LT(max_abs_diff(C.to_dense(), 1.5 * Ad), 1e-14);
}

TEST(Sparse, NestedDissectionIsAPermutation)
{
    const SparseMatrix A = grid_laplacian(40);
    std::vector<std::size_t> p = nested_dissection(A);
    ASSERT_EQ(p.size(), A.rows());
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < p.size(); ++i)
        EXPECT_EQ(p[i], i);
}

// ---------------------------------------------------------------------------
// Factorizations

TEST(Cholesky, OneByOne)
{
    TripletBuilder tb(1, 1);
    tb.add(0, 0, 4.0);
    const SparseCholesky F(tb.finalize(true));
    EXPECT_DOUBLE_EQ(F.solve(Vector{1.0})[0], 0.25);
}

TEST(Cholesky, StiffnessRoundTripOnes)
{
    const Mesh2D mesh = build_unit_square_mesh(4);
    const DofMaps maps = build_dof_maps(mesh, embed_midline(mesh), BoundaryConditions::Coupled);
    const SparseMatrix A = assemble_stiffness_2d(mesh, maps.U);
    const Vector ones(A.rows(), 1.0);
    const Vector x = SparseCholesky(A).solve(A.apply(ones));
    EXPECT_LT(max_abs_diff(x, ones), 1e-12);
}

TEST(Cholesky, RandomSpdAgainstGaussianElimination)
{
    std::mt19937_64 rng(11);
    const DenseMatrix Ad = random_spd(20, rng);
    const Vector b = random_vector(20, rng);
    const Vector oracle = gauss_solve(Ad, b);
    EXPECT_LT(max_abs_diff(SparseCholesky(sparse_from_dense(Ad, true)).solve(b), oracle), 1e-10);
    EXPECT_LT(max_abs_diff(DenseCholesky(Ad).solve(b), oracle), 1e-10);
    EXPECT_LT(max_abs_diff(DenseLU(Ad).solve(b), oracle), 1e-10);
}

TEST(Cholesky, IdentityPermutationMatchesNestedDissection)
{
    const SparseMatrix A = grid_laplacian(12);
    std::vector<std::size_t> id(A.rows());
    for (std::size_t i = 0; i < id.size(); ++i)
        id[i] = i;
    std::mt19937_64 rng(5);
    const Vector b = random_vector(A.rows(), rng);
    EXPECT_LT(max_abs_diff(SparseCholesky(A, id).solve(b), SparseCholesky(A).solve(b)), 1e-12);
}

TEST(Cholesky, RoundTripHundredProbes)
{
    const Mesh2D mesh = build_unit_square_mesh(32);
    const DofMaps maps = build_dof_maps(mesh, embed_left_edge(mesh), BoundaryConditions::Babuska);
    const SparseMatrix A = add(assemble_stiffness_2d(mesh, maps.U), assemble_mass_2d(mesh, maps.U));
    const SparseCholesky F(A);
    std::mt19937_64 rng(42);
    for (int probe = 0; probe < 100; ++probe) {
        const Vector x = random_vector(A.rows(), rng);
        const Vector y = A.apply(F.solve(x));
        EXPECT_LT(max_abs_diff(x, y) / std::max(1e-300, *std::max_element(x.begin(), x.end())), 1e-11);
    }
}

TEST(Cholesky, RejectsIndefinite)
{
    DenseMatrix D(2, 2);
    D(0, 0) = 1.0;
    D(0, 1) = D(1, 0) = 2.0;
    D(1, 1) = 1.0;
    EXPECT_THROW(SparseCholesky{sparse_from_dense(D, true)}, NotSPD);
    EXPECT_THROW(DenseCholesky{D}, NotSPD);
}

// ---------------------------------------------------------------------------
// Eigensolvers

TEST(Eigen, OneByOnePencil)
{
    const auto ed = sym_gevp_dense(DenseMatrix(1, 1, 4.0), DenseMatrix(1, 1, 1.0 / 3.0));
    EXPECT_NEAR(ed.values[0], 12.0, 1e-13);
    EXPECT_NEAR(std::abs(ed.vectors(0, 0)), std::sqrt(3.0), 1e-13);
}

TEST(Eigen, IdentityPencil)
{
    const std::size_t k = 6;
    const auto ed = sym_gevp_dense(DenseMatrix::identity(k), DenseMatrix::identity(k));
    for (double l : ed.values)
        EXPECT_NEAR(l, 1.0, 1e-14);
    EXPECT_LT(max_abs_diff(transpose_times(ed.vectors, ed.vectors), DenseMatrix::identity(k)), 1e-13);
}

TEST(Eigen, GammaPencilAgainstInertiaBisection)
{
    auto d = discretize_coupled(10);
    const SparseMatrix& A = d->A_V;
    const SparseMatrix& M = d->M_Q;
    ASSERT_EQ(A.rows(), 9u);
    const Vector ev = sym_gevp_dense(A.to_dense(), M.to_dense(), false).values;
    double hi = 1.0;
    while (count_below(A, M, hi) < A.rows())
        hi *= 2.0;
    for (std::size_t k = 0; k < A.rows(); ++k)
        EXPECT_NEAR(ev[k], bisect_eigenvalue(A, M, k, 0.0, hi), 1e-8 * std::max(1.0, ev[k]));
}

TEST(Eigen, ReconstructionAndOrthonormality)
{
    std::mt19937_64 rng(8);
    const DenseMatrix A = random_spd(30, rng);
    const DenseMatrix M = random_spd(30, rng);
    const auto ed = sym_gevp_dense(A, M);
    for (double l : ed.values)
        EXPECT_GT(l, 0.0);
    EXPECT_TRUE(std::is_sorted(ed.values.begin(), ed.values.end()));
    const DenseMatrix MU = M * ed.vectors;
    DenseMatrix MUL = MU;
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t k = 0; k < 30; ++k)
            MUL(i, k) *= ed.values[k];
    EXPECT_LT(max_abs_diff(MUL * MU.transpose(), A) / max_abs(A), 1e-9);
    EXPECT_LT(max_abs_diff(transpose_times(ed.vectors, MU), DenseMatrix::identity(30)), 1e-10);
}

TEST(Eigen, SymEigMatchesCharacteristicRoots)
{
    DenseMatrix A(3, 3);
    A(0, 0) = 2;
    A(1, 1) = 3;
    A(2, 2) = 4;
    A(0, 1) = A(1, 0) = 1;
    // Eigenvalues of [[2,1],[1,3]] are (5 ± √5)/2.
    const Vector ev = sym_eigenvalues(A);
    EXPECT_NEAR(ev[0], (5.0 - std::sqrt(5.0)) / 2.0, 1e-14);
    EXPECT_NEAR(ev[1], (5.0 + std::sqrt(5.0)) / 2.0, 1e-14);
    EXPECT_NEAR(ev[2], 4.0, 1e-14);
}

TEST(Tridiagonal, SmallClosedForms)
{
    const auto one = tridiag_evp({2.0}, {});
    ASSERT_EQ(one.values.size(), 1u);
    EXPECT_DOUBLE_EQ(one.values[0], 2.0);
    const auto two = tridiag_evp({2.0, 2.0}, {-1.0});
    EXPECT_NEAR(two.values[0], 1.0, 1e-14);
    EXPECT_NEAR(two.values[1], 3.0, 1e-14);
}

TEST(Tridiagonal, DiscreteLaplacianClosedForm)
{
    // Eigenvalues of tridiag(-1, 2, -1) of order n are 2 − 2cos(kπ/(n+1)).
    const std::size_t n = 200;
    const auto ed = tridiag_evp(Vector(n, 2.0), Vector(n - 1, -1.0));
    for (std::size_t k = 0; k < n; ++k)
        EXPECT_NEAR(ed.values[k], 2.0 - 2.0 * std::cos(double(k + 1) * M_PI / double(n + 1)), 1e-12);
}

TEST(Tridiagonal, EigenpairsOfClusteredMatrix)
{
    // Wilkinson W21+: eigenvalues come in nearly equal pairs.
    const std::size_t n = 21;
    Vector d(n), e(n - 1, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        d[i] = std::abs(10.0 - double(i));
    const auto ed = tridiag_evp(d, e);
    DenseMatrix T(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        T(i, i) = d[i];
        if (i + 1 < n)
            T(i, i + 1) = T(i + 1, i) = e[i];
    }
    const Vector ref = sym_eigenvalues(T);
    for (std::size_t k = 0; k < n; ++k) {
        EXPECT_NEAR(ed.values[k], ref[k], 1e-12);
        const Vector v = ed.vectors.column(k);
        Vector r = T.apply(v);
        axpy(-ed.values[k], v, r);
        EXPECT_LT(norm2(r), 1e-9 * 11.0);
    }
    EXPECT_LT(max_abs_diff(transpose_times(ed.vectors, ed.vectors), DenseMatrix::identity(n)), 1e-10);
}

TEST(Tridiagonal, RandomAgainstDense)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const std::size_t n = 60;
    Vector d(n), e(n - 1);
    for (auto& x : d)
        x = U(rng);
    for (auto& x : e)
        x = U(rng);
    DenseMatrix T(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        T(i, i) = d[i];
        if (i + 1 < n)
            T(i, i + 1) = T(i + 1, i) = e[i];
    }
    const auto ed = tridiag_evp(d, e);
    const Vector ref = sym_eigenvalues(T);
    for (std::size_t k = 0; k < n; ++k)
        EXPECT_NEAR(ed.values[k], ref[k], 1e-12);
    EXPECT_LT(max_abs_diff(transpose_times(ed.vectors, ed.vectors), DenseMatrix::identity(n)), 1e-10);
}

// ---------------------------------------------------------------------------
// Generalized spectra

TEST(Spectrum, OperatorEqualToPreconditionerInverse)
{
    std::mt19937_64 rng(2);
    const DenseMatrix A = random_spd(12, rng);
    const Vector ev = generalized_spectrum([&](const Vector& x) { return A.apply(x); },
                                           [&](const Vector& x) { return A.apply(x); }, 12);
    for (double l : ev)
        EXPECT_NEAR(l, 1.0, 1e-12);
}

TEST(Spectrum, SchurPreconditionedClusters)
{
    const double g = 0.5 * std::sqrt(5.0);
    for (double eps : {1e-2, 1.0, 1e2}) {
        BlockSystem sys = build_coupled(10, eps);
        const Vector ev = generalized_spectrum(sys, schur_preconditioner(sys));
        for (double l : ev) {
            const double dist = std::min({std::abs(l - 1.0), std::abs(l - 0.5 - g), std::abs(l - 0.5 + g)});
            EXPECT_LT(dist, 1e-8) << "eps " << eps << " eigenvalue " << l;
        }
    }
}

TEST(Spectrum, BabuskaCoarsestMesh)
{
    BlockSystem sys(discretize_babuska(8), 1.0);
    const SpectrumReport r = summarize_spectrum(generalized_spectrum(sys, babuska_preconditioner(sys)));
    EXPECT_NEAR(r.abs_min, 0.311, 0.0005);
    EXPECT_NEAR(r.abs_max, 1.750, 0.0005);
    EXPECT_NEAR(r.kappa, 5.622, 0.0005);
}

// ---------------------------------------------------------------------------
// MinRes

TEST(Minres, IdentityConvergesInOneIteration)
{
    std::mt19937_64 rng(1);
    const Vector b = random_vector(25, rng);
    const LinearOperator I = [](const Vector& x) { return x; };
    const SolveReport rep = minres(I, I, b, Vector(25, 0.0));
    EXPECT_TRUE(rep.converged);
    EXPECT_EQ(rep.iterations, 1u);
    EXPECT_LT(max_abs_diff(rep.solution, b), 1e-14);
}

TEST(Minres, IndefiniteSystemAgainstDirectSolve)
{
    std::mt19937_64 rng(9);
    const std::size_t n = 40;
    DenseMatrix A = random_spd(n, rng);
    for (std::size_t i = 0; i < n; i += 3)
        for (std::size_t j = 0; j < n; ++j) {
            A(i, j) = -A(i, j);
            A(j, i) = i == j ? A(i, j) : -A(j, i);
        }
    A = 0.5 * (A + A.transpose());
    const DenseMatrix P = random_spd(n, rng);
    const DenseCholesky FP(P);
    const Vector b = random_vector(n, rng);
    MinresOptions opt;
    opt.tol = 1e-24;
    opt.max_iter = 400;
    const SolveReport rep = minres([&](const Vector& x) { return A.apply(x); },
                                   [&](const Vector& x) { return FP.solve(x); }, b, Vector(n, 0.0), opt);
    EXPECT_TRUE(rep.converged);
    const Vector oracle = gauss_solve(A, b);
    EXPECT_LT(max_abs_diff(rep.solution, oracle), 1e-8 * std::max(1.0, norm2(oracle)));
    for (std::size_t k = 1; k < rep.residual_history.size(); ++k)
        EXPECT_LE(rep.residual_history[k], rep.residual_history[k - 1] * (1.0 + 1e-12));
}

TEST(Minres, ThrowsOnIterationCapWhenAsked)
{
    std::mt19937_64 rng(4);
    const DenseMatrix A = random_spd(50, rng);
    const Vector b = random_vector(50, rng);
    MinresOptions opt;
    opt.max_iter = 2;
    opt.throw_on_max_iter = true;
    const LinearOperator I = [](const Vector& x) { return x; };
    EXPECT_THROW(minres([&](const Vector& x) { return A.apply(x); }, I, b, Vector(50, 0.0), opt), NoConvergence);
    opt.throw_on_max_iter = false;
    const SolveReport rep = minres([&](const Vector& x) { return A.apply(x); }, I, b, Vector(50, 0.0), opt);
    EXPECT_FALSE(rep.converged);
    EXPECT_EQ(rep.iterations, 2u);
}

TEST(Minres, SchurPreconditionedCoupledSystem)
{
    BlockSystem sys = build_coupled(10, 1.0);
    const BlockPreconditioner P = schur_preconditioner(sys);
    const SolveReport rep = solve_system(sys, P, manufactured_rhs(sys), SolveSettings{});
    EXPECT_TRUE(rep.converged);
    EXPECT_LE(rep.iterations, 5u);
}
