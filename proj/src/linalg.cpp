#include <qpt/linalg.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fmt/core.h>

namespace qpt {

DegenerateGapError::DegenerateGapError(double gap, int n_occ)
    : std::runtime_error(fmt::format(
          "HOMO-LUMO gap {:.3e} Hartree (n_occ = {}) is below the degeneracy tolerance", gap,
          n_occ)),
      m_gap(gap) {}

Mat symmetrize(const Mat &a) { return 0.5 * (a + a.transpose()); }

Mat cholesky(const Mat &S) {
    if (S.rows() != S.cols()) throw std::invalid_argument("cholesky: matrix is not square");
    const Eigen::Index n = S.rows();
    Mat L = Mat::Zero(n, n);
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = S(j, j);
        for (Eigen::Index k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
        smallest = std::min(smallest, d);
        if (!(d > 0.0))
            throw NotPositiveDefinite(fmt::format(
                "cholesky: pivot {} is {:.3e}; overlap is not positive definite", j, d));
        L(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double v = S(i, j);
            for (Eigen::Index k = 0; k < j; ++k) v -= L(i, k) * L(j, k);
            L(i, j) = v / L(j, j);
        }
    }
    return L;
}

Mat whiten(const Mat &H, const Mat &L) {
    const auto tri = L.triangularView<Eigen::Lower>();
    Mat X = tri.solve(H);                        // L^{-1} H
    Mat Y = tri.solve(X.transpose()).transpose(); // (L^{-1} (L^{-1} H)^T)^T
    return symmetrize(Y);
}

EigResult generalized_eigh(const Mat &H, const Mat &L) {
    if (H.rows() != L.rows() || H.cols() != L.cols())
        throw std::invalid_argument("generalized_eigh: dimension mismatch");
    const Mat Ht = whiten(H, L);
    Eigen::SelfAdjointEigenSolver<Mat> solver(Ht);
    if (solver.info() != Eigen::Success)
        throw EigenSolverError("generalized_eigh: symmetric eigensolver did not converge");
    EigResult out;
    out.eps = solver.eigenvalues();
    out.C = L.transpose().triangularView<Eigen::Upper>().solve(solver.eigenvectors());
    for (Eigen::Index k = 0; k < out.C.cols(); ++k) {
        Eigen::Index imax = 0;
        out.C.col(k).cwiseAbs().maxCoeff(&imax);
        if (out.C(imax, k) < 0) out.C.col(k) *= -1.0;
    }
    return out;
}

void check_gap(const EigResult &eig, int n_occ, double tol) {
    if (n_occ < 1 || n_occ > eig.eps.size())
        throw std::invalid_argument(fmt::format("n_occ {} out of range", n_occ));
    if (n_occ == eig.eps.size()) return; // no virtual space
    const double gap = eig.eps[n_occ] - eig.eps[n_occ - 1];
    if (!(gap > tol)) throw DegenerateGapError(gap, n_occ);
}

Mat occupied_density(const EigResult &eig, int n_occ) {
    const auto occ = eig.C.leftCols(n_occ);
    return symmetrize(2.0 * occ * occ.transpose());
}

Mat density_adjoint(const EigResult &eig, int n_occ, const Mat &G, double gap_tol) {
    const Eigen::Index n = eig.C.rows();
    if (G.rows() != n || G.cols() != n) throw std::invalid_argument("density_adjoint: shape");
    check_gap(eig, n_occ, gap_tol);
    const Eigen::Index nv = n - n_occ;
    if (nv == 0) return Mat::Zero(n, n);

    const auto occ = eig.C.leftCols(n_occ);
    const auto virt = eig.C.rightCols(nv);
    Mat M = virt.transpose() * (G + G.transpose()) * occ; // nv x n_occ
    for (Eigen::Index a = 0; a < nv; ++a)
        for (Eigen::Index i = 0; i < n_occ; ++i)
            M(a, i) *= 2.0 / (eig.eps[i] - eig.eps[n_occ + a]);
    return symmetrize(virt * M * occ.transpose());
}

} // namespace qpt
