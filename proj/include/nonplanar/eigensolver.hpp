#pragma once

// Real symmetric eigenproblems: dense and banded LAPACK drivers, an
// implicit-shift QL for tridiagonals, and a Lanczos solver with full
// reorthogonalization for the low end of large operators.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "nonplanar/core.hpp"

namespace nonplanar {

struct EigenResult {
    std::vector<double> values;  // ascending
    Eigen::MatrixXd vectors;     // columns, empty when not requested
    std::vector<double> residuals;
    std::string method;  // dense, banded, iterative
    int iterations = 0;
    int restarts = 0;
};

/// max |A - A^T| / max |A|.
inline double symmetry_defect(const Eigen::MatrixXd& a) {
    const double scale = a.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

inline std::vector<double> residual_norms(const Eigen::MatrixXd& a, const std::vector<double>& values,
                                          const Eigen::MatrixXd& vectors) {
    std::vector<double> res(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        res[i] = (a * vectors.col(i) - values[i] * vectors.col(i)).norm();
    return res;
}

/// All eigenpairs of a dense symmetric matrix (LAPACK dsyevr: Householder
/// tridiagonalization then MRRR). Rejects input that is not symmetric.
inline EigenResult solve_dense(const Eigen::MatrixXd& a, bool want_vectors = true, int count = -1) {
    if (a.rows() != a.cols()) throw DomainError("solve_dense requires a square matrix");
    const lapack_int n = static_cast<lapack_int>(a.rows());
    EigenResult out;
    out.method = "dense";
    if (n == 0) return out;
    const double defect = symmetry_defect(a);
    if (defect > 1e-12) throw DomainError("solve_dense: matrix is not symmetric (relative defect " + std::to_string(defect) + ")");
    const lapack_int k = (count < 0 || count > n) ? n : count;
    Eigen::MatrixXd work = a;
    std::vector<double> w(n);
    Eigen::MatrixXd z;
    if (want_vectors) z.resize(n, k);
    std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(n));
    lapack_int m = 0;
    const lapack_int info =
        LAPACKE_dsyevr(LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', k == n ? 'A' : 'I', 'L', n, work.data(), n, 0.0, 0.0,
                       1, k, 0.0, &m, w.data(), want_vectors ? z.data() : nullptr, want_vectors ? n : 1, isuppz.data());
    if (info != 0) throw ToleranceError("dsyevr failed with info=" + std::to_string(info));
    out.values.assign(w.begin(), w.begin() + m);
    if (want_vectors) {
        out.vectors = z.leftCols(m);
        out.residuals = residual_norms(a, out.values, out.vectors);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tridiagonal QL

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal d and
/// off-diagonal e (e[i] couples i and i+1). Implicit shifts, EISPACK tql2
/// ordering. When z is non-null it must hold the identity (or a basis to
/// rotate) on entry; its columns become the eigenvectors. Output ascending.
inline void tridiagonal_ql(std::vector<double>& d, std::vector<double> e, Eigen::MatrixXd* z = nullptr) {
    const int n = static_cast<int>(d.size());
    if (n == 0) return;
    e.resize(n, 0.0);
    e[n - 1] = 0.0;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m = l;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= eps * dd) break;
            }
            if (m != l) {
                if (iter++ == 60)
                    throw ToleranceError("tridiagonal QL did not converge for eigenvalue index " + std::to_string(l));
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                int i = m - 1;
                for (; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    if (z) {
                        for (Eigen::Index k = 0; k < z->rows(); ++k) {
                            f = (*z)(k, i + 1);
                            (*z)(k, i + 1) = s * (*z)(k, i) + c * f;
                            (*z)(k, i) = c * (*z)(k, i) - s * f;
                        }
                    }
                }
                if (r == 0.0 && i >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d[a] < d[b]; });
    std::vector<double> sorted(n);
    for (int i = 0; i < n; ++i) sorted[i] = d[order[i]];
    d = sorted;
    if (z) {
        Eigen::MatrixXd zs(z->rows(), n);
        for (int i = 0; i < n; ++i) zs.col(i) = z->col(order[i]);
        *z = std::move(zs);
    }
}

// ---------------------------------------------------------------------------
// Banded storage

/// Symmetric band matrix in LAPACK lower storage: ab[(i - j) + j * (kd + 1)].
struct BandMatrix {
    int n = 0;
    int kd = 0;
    std::vector<double> ab;

    BandMatrix() = default;
    BandMatrix(int n_, int kd_) : n(n_), kd(kd_), ab(static_cast<std::size_t>(kd_ + 1) * n_, 0.0) {}

    double& lower(int i, int j) { return ab[static_cast<std::size_t>(i - j) + static_cast<std::size_t>(j) * (kd + 1)]; }
    double lower(int i, int j) const { return ab[static_cast<std::size_t>(i - j) + static_cast<std::size_t>(j) * (kd + 1)]; }

    /// Lower triangle of a sparse symmetric matrix.
    template <typename Sparse>
    static BandMatrix from_sparse(const Sparse& s) {
        int kd = 0;
        for (int k = 0; k < s.outerSize(); ++k)
            for (typename Sparse::InnerIterator it(s, k); it; ++it)
                kd = std::max(kd, static_cast<int>(std::abs(it.row() - it.col())));
        BandMatrix b(static_cast<int>(s.rows()), kd);
        for (int k = 0; k < s.outerSize(); ++k)
            for (typename Sparse::InnerIterator it(s, k); it; ++it)
                if (it.row() >= it.col()) b.lower(static_cast<int>(it.row()), static_cast<int>(it.col())) = it.value();
        return b;
    }
};

/// Lowest `count` eigenpairs of a band matrix (LAPACK dsbevx). Eigenvectors
/// need an n x n workspace for the band reduction, so callers with large n
/// should ask for values only.
inline EigenResult solve_banded(const BandMatrix& band, int count, bool want_vectors = false) {
    EigenResult out;
    out.method = "banded";
    const lapack_int n = band.n;
    if (n == 0) return out;
    const lapack_int k = std::clamp<lapack_int>(count, 1, n);
    std::vector<double> ab = band.ab;
    std::vector<double> q(want_vectors ? static_cast<std::size_t>(n) * n : 1);
    std::vector<double> w(n);
    Eigen::MatrixXd z;
    if (want_vectors) z.resize(n, k);
    std::vector<lapack_int> ifail(n);
    lapack_int m = 0;
    const lapack_int info = LAPACKE_dsbevx(LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', 'I', 'L', n, band.kd, ab.data(),
                                           band.kd + 1, q.data(), want_vectors ? n : 1, 0.0, 0.0, 1, k,
                                           2.0 * LAPACKE_dlamch('S'), &m, w.data(),
                                           want_vectors ? z.data() : nullptr, want_vectors ? n : 1, ifail.data());
    if (info != 0) throw ToleranceError("dsbevx failed with info=" + std::to_string(info));
    out.values.assign(w.begin(), w.begin() + m);
    if (want_vectors) out.vectors = z.leftCols(m);
    return out;
}

// ---------------------------------------------------------------------------
// Lanczos

using LinearOperator = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LanczosOptions {
    double tol = 1e-10;  // relative to the largest Ritz value magnitude
    std::uint64_t seed = 1;
    int max_dim = 0;  // Krylov dimension cap, 0 means min(n, max(4k + 40, 200)) growing to n
    bool largest = false;
    int max_restarts = 3;
};

/// Probes x^T A y - y^T A x on random vectors.
inline double stochastic_symmetry_defect(const LinearOperator& apply, int n, std::uint64_t seed, int probes = 3) {
    CounterRng rng(CounterRng::substream(seed, 0x5e11));
    double worst = 0.0;
    Eigen::VectorXd x(n), y(n), ax(n), ay(n);
    for (int p = 0; p < probes; ++p) {
        for (int i = 0; i < n; ++i) x[i] = rng.normal();
        for (int i = 0; i < n; ++i) y[i] = rng.normal();
        apply(x, ax);
        apply(y, ay);
        const double scale = std::max(ax.norm() * y.norm() + ay.norm() * x.norm(), 1e-300);
        worst = std::max(worst, std::abs(y.dot(ax) - x.dot(ay)) / scale);
    }
    return worst;
}

/// Extremal k eigenpairs of a symmetric operator of order n.
inline EigenResult lanczos(const LinearOperator& apply, int n, int k, const LanczosOptions& opt = {}) {
    if (k < 1 || k > n) throw DomainError("lanczos: need 1 <= k <= n");
    const double defect = stochastic_symmetry_defect(apply, n, opt.seed);
    if (defect > 1e-10) throw DomainError("lanczos: operator is not symmetric (defect " + std::to_string(defect) + ")");

    int cap = opt.max_dim > 0 ? std::min(opt.max_dim, n) : n;
    Eigen::MatrixXd v(n, std::min(cap, std::max(4 * k + 40, 200)));
    std::vector<double> alpha, beta;
    int restarts = 0;
    std::uint64_t stream = 1;

    auto random_orthogonal = [&](int j, Eigen::VectorXd& out) -> bool {
        CounterRng rng(CounterRng::substream(opt.seed, stream++));
        for (int i = 0; i < n; ++i) out[i] = rng.normal();
        for (int pass = 0; pass < 2; ++pass)
            for (int c = 0; c < j; ++c) out -= v.col(c).dot(out) * v.col(c);
        const double nrm = out.norm();
        if (nrm < 1e-8 * std::sqrt(static_cast<double>(n))) return false;
        out /= nrm;
        return true;
    };

    Eigen::VectorXd w(n), q(n);
    random_orthogonal(0, q);
    v.col(0) = q;

    std::vector<double> theta;
    Eigen::MatrixXd s;
    int j = 0;
    bool converged = false;
    int next_check = std::min(n, std::max(2 * k, k + 20));
    for (;;) {
        apply(v.col(j), w);
        const double a = v.col(j).dot(w);
        alpha.push_back(a);
        w -= a * v.col(j);
        if (j > 0) w -= beta[j - 1] * v.col(j - 1);
        for (int pass = 0; pass < 2; ++pass) {
            const Eigen::VectorXd h = v.leftCols(j + 1).transpose() * w;
            w -= v.leftCols(j + 1) * h;
        }
        double b = w.norm();
        const int dim = j + 1;

        const double scale = std::max(1.0, std::abs(a));
        const bool full = dim == n;
        const bool breakdown = !full && b < 1e-12 * scale;

        if (dim >= next_check || full || dim == cap) {
            theta = alpha;
            std::vector<double> off(beta.begin(), beta.end());
            s = Eigen::MatrixXd::Identity(dim, dim);
            tridiagonal_ql(theta, off, &s);
            const double tmax = std::max(std::abs(theta.front()), std::abs(theta.back()));
            converged = dim >= k;
            for (int i = 0; i < k && converged; ++i) {
                const int idx = opt.largest ? dim - 1 - i : i;
                if (std::abs(b * s(dim - 1, idx)) > opt.tol * std::max(tmax, 1e-300)) converged = false;
            }
            if (converged || full) break;
            if (dim == cap) throw ToleranceError("lanczos: Krylov dimension cap " + std::to_string(cap) +
                                                 " reached before " + std::to_string(k) + " pairs converged");
            next_check = std::min(n, dim + std::max(10, dim / 4));
        }

        if (dim == v.cols()) {
            const Eigen::Index grow = std::min<Eigen::Index>(cap, 2 * v.cols());
            v.conservativeResize(Eigen::NoChange, grow);
        }
        if (breakdown) {
            // Invariant subspace found; continue from a fresh random direction.
            int failures = 0;
            while (!random_orthogonal(dim, q)) {
                if (++failures > opt.max_restarts)
                    throw ToleranceError("lanczos: breakdown at step " + std::to_string(dim) + " and " +
                                         std::to_string(opt.max_restarts) + " restarts failed");
            }
            ++restarts;
            b = 0.0;
            v.col(dim) = q;
        } else {
            v.col(dim) = w / b;
        }
        beta.push_back(b);
        j = dim;
    }

    const int dim = static_cast<int>(alpha.size());
    EigenResult out;
    out.method = "iterative";
    out.iterations = dim;
    out.restarts = restarts;
    out.vectors.resize(n, k);
    for (int i = 0; i < k; ++i) {
        const int idx = opt.largest ? dim - 1 - i : i;
        out.values.push_back(theta[idx]);
        out.vectors.col(i) = v.leftCols(dim) * s.col(idx);
        out.vectors.col(i).normalize();
    }
    out.residuals.resize(k);
    for (int i = 0; i < k; ++i) {
        apply(out.vectors.col(i), w);
        out.residuals[i] = (w - out.values[i] * out.vectors.col(i)).norm();
    }
    return out;
}

/// Lowest k eigenpairs of a symmetric operator given by its action.
inline EigenResult solve_lowest_k(const LinearOperator& apply, int n, int k, double tol = 1e-10,
                                  std::uint64_t seed = 1) {
    LanczosOptions opt;
    opt.tol = tol;
    opt.seed = seed;
    return lanczos(apply, n, k, opt);
}

/// Lowest k eigenpairs of a sparse symmetric matrix by shift-invert Lanczos:
/// a band Cholesky factor of (A - sigma I) is applied inversely, so the low
/// end converges in a few times k steps.
inline EigenResult solve_lowest_k_shift_invert(const Eigen::SparseMatrix<double, Eigen::RowMajor>& a, int k,
                                               double tol = 1e-10, std::uint64_t seed = 1, double shift = 0.0) {
    const int n = static_cast<int>(a.rows());
    BandMatrix band = BandMatrix::from_sparse(a);
    std::vector<double> factor;
    double sigma = shift;
    for (int attempt = 0;; ++attempt) {
        factor = band.ab;
        for (int i = 0; i < n; ++i) factor[static_cast<std::size_t>(i) * (band.kd + 1)] -= sigma;
        const lapack_int info = LAPACKE_dpbtrf(LAPACK_COL_MAJOR, 'L', n, band.kd, factor.data(), band.kd + 1);
        if (info == 0) break;
        if (attempt == 60) throw ToleranceError("shift-invert: no positive definite shift found");
        sigma -= std::max(1.0, 2.0 * std::abs(sigma));
    }
    LinearOperator inv = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
        y = x;
        const lapack_int info =
            LAPACKE_dpbtrs(LAPACK_COL_MAJOR, 'L', n, band.kd, 1, factor.data(), band.kd + 1, y.data(), n);
        if (info != 0) throw ToleranceError("dpbtrs failed with info=" + std::to_string(info));
    };
    LanczosOptions opt;
    opt.tol = 1e-13;
    opt.seed = seed;
    opt.largest = true;
    EigenResult r = lanczos(inv, n, k, opt);
    // theta = 1 / (lambda - sigma); Rayleigh quotients on A are more accurate.
    std::vector<int> order(k);
    std::vector<double> lam(k);
    for (int i = 0; i < k; ++i) {
        const Eigen::VectorXd x = r.vectors.col(i);
        lam[i] = x.dot(a * x);
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return lam[x] < lam[y]; });
    EigenResult out;
    out.method = "iterative";
    out.iterations = r.iterations;
    out.restarts = r.restarts;
    out.vectors.resize(n, k);
    out.residuals.resize(k);
    double vmax = 0.0;
    for (int i = 0; i < k; ++i) {
        out.values.push_back(lam[order[i]]);
        out.vectors.col(i) = r.vectors.col(order[i]);
        out.residuals[i] = (a * out.vectors.col(i) - out.values[i] * out.vectors.col(i)).norm();
        vmax = std::max(vmax, std::abs(out.values[i]));
    }
    for (int i = 0; i < k; ++i)
        if (out.residuals[i] > tol * std::max(vmax, 1.0))
            throw ToleranceError("shift-invert Lanczos: residual " + std::to_string(out.residuals[i]) + " for pair " +
                                 std::to_string(i) + " exceeds tolerance");
    return out;
}

}  // namespace nonplanar
