#pragma once

// Finite differences for H = -(1/2)(1/sqrt g) d_i (sqrt g g^ij d_j) + U + V on
// a Cartesian grid with Dirichlet walls.
//
// The kinetic quadratic form (1/2) int C grad psi . grad psi, C = sqrt g g^-1,
// is discretized with C_xx, C_yy on grid edges and C_xy at cell centres
// (gradients averaged over the cell corners), the mass with sqrt g at the
// nodes. K psi = E M psi is then returned as S = M^-1/2 K M^-1/2 + diag(U + V).
// On a flat surface S is exactly the 5-point Laplacian.

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "nonplanar/classical.hpp"
#include "nonplanar/core.hpp"
#include "nonplanar/eigensolver.hpp"
#include "nonplanar/geometry.hpp"
#include "nonplanar/spectra.hpp"

namespace nonplanar {

struct GridSpec {
    int nx = 0;
    int ny = 0;
    double hx = 0.0;
    double hy = 0.0;
    Vec2 origin{};           // location of the (virtual) boundary node (-1, -1)
    std::vector<int> index;  // node (i, j) -> unknown, -1 when masked out
    int unknowns = 0;

    Vec2 node(int i, int j) const { return {origin.x + (i + 1) * hx, origin.y + (j + 1) * hy}; }
    int at(int i, int j) const {
        if (i < 0 || j < 0 || i >= nx || j >= ny) return -1;
        return index[static_cast<std::size_t>(j) * nx + i];
    }
};

/// Interior nodes of the contour's bounding box, hx = width / (nx + 1).
/// Circle nodes outside the wall are masked (Dirichlet by elimination).
inline GridSpec make_grid(const Contour& contour, int nx, int ny) {
    if (nx < 1 || ny < 1) throw DomainError("grid needs nx, ny >= 1");
    GridSpec g;
    g.nx = nx;
    g.ny = ny;
    const Vec2 lo = contour.lower_corner(), hi = contour.upper_corner();
    g.hx = (hi.x - lo.x) / (nx + 1);
    g.hy = (hi.y - lo.y) / (ny + 1);
    g.origin = lo;
    g.index.assign(static_cast<std::size_t>(nx) * ny, -1);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            if (contour.signed_distance(g.node(i, j)) > 0.0) g.index[static_cast<std::size_t>(j) * nx + i] = g.unknowns++;
    if (g.unknowns == 0) throw DomainError("grid has no interior nodes");
    return g;
}

struct DiscreteOperator {
    Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;  // symmetric S
    std::vector<double> mass;                             // M per unknown (sqrt g hx hy, or g hx hy in strong field)
    std::vector<double> potential;                        // U + V per unknown
    GridSpec grid;
    bool strong_field = false;
    ConfiningForm form = ConfiningForm::derived;
    double asymmetry = 0.0;  // max |S - S^T| / max |S|

    int dim() const { return static_cast<int>(matrix.rows()); }
};

namespace detail {

inline void check_apex(const BilliardDomain& d, Vec2 p, double eps) {
    if (d.surface.is_cone() && (p - d.surface.center()).norm() < eps)
        throw DomainError("cone apex coincides with a grid evaluation point at (" + std::to_string(p.x) + ", " +
                          std::to_string(p.y) + ")");
}

}  // namespace detail

/// Assembles the symmetrized Hamiltonian. With strong_field the kinetic part is
/// reduced to xi H0 (C = I and mass g hx hy), as when the field term dominates.
inline DiscreteOperator assemble(const BilliardDomain& d, const GridSpec& grid, bool strong_field = false,
                                 ConfiningForm form = ConfiningForm::derived) {
    d.validate();
    const double apex_eps = 1e-9 * d.contour.scale();
    const int nx = grid.nx, ny = grid.ny;
    const double hx = grid.hx, hy = grid.hy;
    const int n = grid.unknowns;

    std::vector<double> mass(n), pot(n), diag(n, 0.0);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 9);

    // node terms
    parallel_for(static_cast<std::size_t>(ny), [&](std::size_t jj) {
        const int j = static_cast<int>(jj);
        for (int i = 0; i < nx; ++i) {
            const int a = grid.at(i, j);
            if (a < 0) continue;
            const Vec2 p = grid.node(i, j);
            detail::check_apex(d, p, apex_eps);
            const double r = d.surface.radius_of(p);
            const Vec2 gr = d.surface.gradient_at(p);
            const double g = 1.0 + gr.dot(gr);
            mass[a] = (strong_field ? g : std::sqrt(g)) * hx * hy;
            pot[a] = coefficient_fields(d.surface, r, form).u_sigma + d.potential(r);
        }
    });

    // Edge midpoints and cell centres may fall on the apex (a centred cone
    // always hits one of them); there C is replaced by its angular average.
    auto cmat = [&](Vec2 p, double& cxx, double& cyy, double& cxy) {
        if (strong_field) {
            cxx = cyy = 1.0;
            cxy = 0.0;
            return;
        }
        if (d.surface.is_cone() && (p - d.surface.center()).norm() < apex_eps) {
            const double s2 = square(d.surface.max_slope());
            cxx = cyy = (1.0 + 0.5 * s2) / std::sqrt(1.0 + s2);
            cxy = 0.0;
            return;
        }
        const Vec2 gr = d.surface.gradient_at(p);
        const double sg = std::sqrt(1.0 + gr.dot(gr));
        cxx = (1.0 + gr.y * gr.y) / sg;
        cyy = (1.0 + gr.x * gr.x) / sg;
        cxy = -gr.x * gr.y / sg;
    };

    auto add = [&](int a, int b, double v) {
        if (a < 0 || b < 0) return;
        if (a == b)
            diag[a] += v;
        else
            trip.emplace_back(a, b, v);
    };

    // edges: (1/2) w (psi_a - psi_b)^2
    for (int j = 0; j < ny; ++j) {
        for (int i = -1; i < nx; ++i) {
            const int a = grid.at(i, j), b = grid.at(i + 1, j);
            if (a < 0 && b < 0) continue;
            double cxx, cyy, cxy;
            cmat({grid.origin.x + (i + 1.5) * hx, grid.origin.y + (j + 1) * hy}, cxx, cyy, cxy);
            const double w = 0.5 * cxx * hy / hx;
            add(a, a, w);
            add(b, b, w);
            add(a, b, -w);
            add(b, a, -w);
        }
    }
    for (int j = -1; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int a = grid.at(i, j), b = grid.at(i, j + 1);
            if (a < 0 && b < 0) continue;
            double cxx, cyy, cxy;
            cmat({grid.origin.x + (i + 1) * hx, grid.origin.y + (j + 1.5) * hy}, cxx, cyy, cxy);
            const double w = 0.5 * cyy * hx / hy;
            add(a, a, w);
            add(b, b, w);
            add(a, b, -w);
            add(b, a, -w);
        }
    }
    // cells: C_xy Dx Dy hx hy with corner-averaged differences
    if (!strong_field && !d.surface.is_flat()) {
        for (int j = -1; j < ny; ++j) {
            for (int i = -1; i < nx; ++i) {
                const int c[4] = {grid.at(i, j), grid.at(i + 1, j), grid.at(i, j + 1), grid.at(i + 1, j + 1)};
                if (c[0] < 0 && c[1] < 0 && c[2] < 0 && c[3] < 0) continue;
                double cxx, cyy, cxy;
                cmat({grid.origin.x + (i + 1.5) * hx, grid.origin.y + (j + 1.5) * hy}, cxx, cyy, cxy);
                if (cxy == 0.0) continue;
                const double ax[4] = {-0.5 / hx, 0.5 / hx, -0.5 / hx, 0.5 / hx};
                const double by[4] = {-0.5 / hy, -0.5 / hy, 0.5 / hy, 0.5 / hy};
                for (int p = 0; p < 4; ++p)
                    for (int q = 0; q < 4; ++q)
                        add(c[p], c[q], 0.5 * cxy * hx * hy * (ax[p] * by[q] + by[p] * ax[q]));
            }
        }
    }

    for (auto& t : trip) t = Eigen::Triplet<double>(t.row(), t.col(), t.value() / std::sqrt(mass[t.row()] * mass[t.col()]));
    for (int a = 0; a < n; ++a) trip.emplace_back(a, a, diag[a] / mass[a] + pot[a]);

    DiscreteOperator op;
    op.matrix.resize(n, n);
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    op.matrix.makeCompressed();
    op.mass = std::move(mass);
    op.potential = std::move(pot);
    op.grid = grid;
    op.strong_field = strong_field;
    op.form = form;
    const Eigen::SparseMatrix<double, Eigen::RowMajor> t = op.matrix.transpose();
    const double scale = op.matrix.coeffs().cwiseAbs().maxCoeff();
    const Eigen::SparseMatrix<double, Eigen::RowMajor> diff = op.matrix - t;
    const double defect = diff.nonZeros() > 0 ? diff.coeffs().cwiseAbs().maxCoeff() : 0.0;
    op.asymmetry = scale > 0.0 ? defect / scale : 0.0;
    return op;
}

/// Applies the unsymmetrized operator M^-1 K + U + V to nodal values psi.
inline Eigen::VectorXd apply_unsymmetrized(const DiscreteOperator& op, const Eigen::VectorXd& psi) {
    Eigen::VectorXd y(psi.size());
    for (int a = 0; a < psi.size(); ++a) y[a] = std::sqrt(op.mass[a]) * psi[a];
    Eigen::VectorXd sy = op.matrix * y;
    for (int a = 0; a < psi.size(); ++a) sy[a] /= std::sqrt(op.mass[a]);
    return sy;
}

enum class FdmSolver { automatic, dense, banded, lanczos };

struct FdmSolution {
    EigenResult eigen;
    Spectrum spectrum;
};

/// Lowest `count` eigenpairs of the assembled operator.
inline FdmSolution solve_fdm(const DiscreteOperator& op, int count, bool want_vectors = false,
                             FdmSolver solver = FdmSolver::automatic, std::uint64_t seed = 1) {
    const int n = op.dim();
    count = std::clamp(count, 1, n);
    if (solver == FdmSolver::automatic) {
        if (n <= 2500)
            solver = FdmSolver::dense;
        else if (count <= 200 && count * 20 < n)
            solver = FdmSolver::lanczos;
        else
            solver = FdmSolver::banded;
    }
    FdmSolution out;
    switch (solver) {
    case FdmSolver::dense:
        out.eigen = solve_dense(Eigen::MatrixXd(op.matrix), want_vectors, count);
        break;
    case FdmSolver::banded:
        out.eigen = solve_banded(BandMatrix::from_sparse(op.matrix), count, want_vectors);
        break;
    case FdmSolver::lanczos:
    case FdmSolver::automatic:
        out.eigen = solve_lowest_k_shift_invert(op.matrix, count, 1e-8, seed);
        break;
    }
    out.spectrum = make_spectrum(out.eigen.values, "fdm");
    return out;
}

struct WavefunctionGrid {
    int nx = 0;
    int ny = 0;
    double hx = 0.0;
    double hy = 0.0;
    Vec2 origin{};  // coordinates of node (0, 0)
    double energy = 0.0;
    int index = 0;
    std::string normalization = "sum |psi|^2 sqrt(g) hx hy = 1";
    std::string config_hash;
    std::vector<double> values;  // row-major, row j holds nodes (0..nx-1, j); masked nodes are 0
};

/// Signed wavefunction psi = M^-1/2 y on the full grid. Normalized under the
/// surface measure because y has unit Euclidean norm.
inline WavefunctionGrid wavefunction_on_grid(const DiscreteOperator& op, const EigenResult& eig, int k) {
    if (k < 0 || k >= static_cast<int>(eig.values.size()) || k >= eig.vectors.cols())
        throw DomainError("eigenvector index " + std::to_string(k) + " out of range");
    const GridSpec& g = op.grid;
    WavefunctionGrid w;
    w.nx = g.nx;
    w.ny = g.ny;
    w.hx = g.hx;
    w.hy = g.hy;
    w.origin = g.node(0, 0);
    w.energy = eig.values[k];
    w.index = k;
    if (op.strong_field) w.normalization = "sum |psi|^2 g hx hy = 1";
    w.values.assign(static_cast<std::size_t>(g.nx) * g.ny, 0.0);
    const Eigen::VectorXd y = eig.vectors.col(k) / eig.vectors.col(k).norm();
    // sign convention: the largest-magnitude value of psi is positive
    Eigen::Index imax = 0;
    (y.array() / Eigen::Map<const Eigen::ArrayXd>(op.mass.data(), y.size()).sqrt()).abs().maxCoeff(&imax);
    const double sign = y[imax] < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const int a = g.at(i, j);
            if (a >= 0) w.values[static_cast<std::size_t>(j) * g.nx + i] = sign * y[a] / std::sqrt(op.mass[a]);
        }
    return w;
}

/// Sum |psi|^2 sqrt(g) hx hy over the grid (1 for a normalized state).
inline double surface_norm(const DiscreteOperator& op, const WavefunctionGrid& w) {
    double s = 0.0;
    for (int j = 0; j < w.ny; ++j)
        for (int i = 0; i < w.nx; ++i) {
            const int a = op.grid.at(i, j);
            if (a >= 0) s += square(w.values[static_cast<std::size_t>(j) * w.nx + i]) * op.mass[a];
        }
    return s;
}

}  // namespace nonplanar
