#include <catch_amalgamated.hpp>

#include <Eigen/Sparse>

#include <cmath>

#include "nonplanar/eigensolver.hpp"

using namespace nonplanar;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// 1D Dirichlet Laplacian on n points: eigenvalues 2 - 2 cos(k pi / (n + 1))
Eigen::SparseMatrix<double, Eigen::RowMajor> laplacian_1d(int n) {
    Eigen::SparseMatrix<double, Eigen::RowMajor> a(n, n);
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < n; ++i) {
        t.emplace_back(i, i, 2.0);
        if (i + 1 < n) {
            t.emplace_back(i, i + 1, -1.0);
            t.emplace_back(i + 1, i, -1.0);
        }
    }
    a.setFromTriplets(t.begin(), t.end());
    return a;
}

double exact_1d(int n, int k) { return 2.0 - 2.0 * std::cos(k * pi / (n + 1)); }

Eigen::MatrixXd random_symmetric(int n, std::uint64_t seed) {
    CounterRng rng(seed);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal();
    return a;
}

}  // namespace

TEST_CASE("dense solver: eigenpairs of a random symmetric matrix") {
    const Eigen::MatrixXd a = random_symmetric(60, 3);
    const EigenResult r = solve_dense(a, true);
    REQUIRE(r.values.size() == 60);
    for (std::size_t i = 1; i < r.values.size(); ++i) CHECK(r.values[i] >= r.values[i - 1]);
    for (double res : residual_norms(a, r.values, r.vectors)) CHECK(res < 1e-11);
    const Eigen::MatrixXd q = r.vectors.transpose() * r.vectors;
    CHECK((q - Eigen::MatrixXd::Identity(60, 60)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THAT(std::accumulate(r.values.begin(), r.values.end(), 0.0), WithinAbs(a.trace(), 1e-10));
}

TEST_CASE("dense solver rejects a non-symmetric matrix") {
    Eigen::MatrixXd a = random_symmetric(10, 4);
    a(0, 1) += 1e-3;
    CHECK_THROWS_AS(solve_dense(a), DomainError);
}

TEST_CASE("tridiagonal QL reproduces the 1D Laplacian spectrum") {
    const int n = 200;
    std::vector<double> d(n, 2.0), e(n, -1.0);
    e[n - 1] = 0.0;
    Eigen::MatrixXd z = Eigen::MatrixXd::Identity(n, n);
    tridiagonal_ql(d, e, &z);
    for (int k = 1; k <= n; ++k) CHECK_THAT(d[k - 1], WithinAbs(exact_1d(n, k), 1e-12));
}

TEST_CASE("banded solver agrees with the dense solver") {
    const auto a = laplacian_1d(300);
    const EigenResult b = solve_banded(BandMatrix::from_sparse(a), 20);
    REQUIRE(b.values.size() == 20);
    for (int k = 1; k <= 20; ++k) CHECK_THAT(b.values[k - 1], WithinAbs(exact_1d(300, k), 1e-12));
}

TEST_CASE("Lanczos lowest-k with full reorthogonalization") {
    const auto a = laplacian_1d(400);
    LinearOperator apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = a * x; };
    const EigenResult r = solve_lowest_k(apply, 400, 6, 1e-10, 11);
    REQUIRE(r.values.size() == 6);
    for (int k = 1; k <= 6; ++k) CHECK_THAT(r.values[k - 1], WithinAbs(exact_1d(400, k), 1e-9));

    // same seed, same answer bit for bit
    const EigenResult again = solve_lowest_k(apply, 400, 6, 1e-10, 11);
    CHECK(again.values == r.values);
    CHECK(again.iterations == r.iterations);
}

TEST_CASE("Lanczos refuses a non-symmetric operator") {
    Eigen::MatrixXd a = random_symmetric(30, 5);
    a(2, 7) += 0.5;
    LinearOperator apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = a * x; };
    CHECK_THROWS_AS(solve_lowest_k(apply, 30, 3), DomainError);
}

TEST_CASE("shift-invert Lanczos on a sparse 2D Laplacian") {
    const int m = 40, n = m * m;
    Eigen::SparseMatrix<double, Eigen::RowMajor> a(n, n);
    std::vector<Eigen::Triplet<double>> t;
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            const int p = j * m + i;
            t.emplace_back(p, p, 4.0);
            if (i + 1 < m) t.emplace_back(p, p + 1, -1.0), t.emplace_back(p + 1, p, -1.0);
            if (j + 1 < m) t.emplace_back(p, p + m, -1.0), t.emplace_back(p + m, p, -1.0);
        }
    a.setFromTriplets(t.begin(), t.end());
    const EigenResult r = solve_lowest_k_shift_invert(a, 10, 1e-10, 2);
    std::vector<double> exact;
    for (int p = 1; p <= m; ++p)
        for (int q = 1; q <= m; ++q) exact.push_back(exact_1d(m, p) + exact_1d(m, q));
    std::sort(exact.begin(), exact.end());
    for (int k = 0; k < 10; ++k) CHECK_THAT(r.values[k], WithinAbs(exact[k], 1e-9));
    const EigenResult dense = solve_dense(Eigen::MatrixXd(a), false, 10);
    for (int k = 0; k < 10; ++k) CHECK_THAT(r.values[k], WithinAbs(dense.values[k], 1e-9));
}
