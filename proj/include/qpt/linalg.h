#pragma once
#include <qpt/integrals.h>

#include <stdexcept>

namespace qpt {

inline constexpr double kDefaultGapTolerance = 1e-9;

/// Overlap matrix is not positive definite (near-linear-dependent basis).
class NotPositiveDefinite : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// HOMO-LUMO gap below tolerance; the density is not differentiable there.
class DegenerateGapError : public std::runtime_error {
  public:
    DegenerateGapError(double gap, int n_occ);
    double gap() const { return m_gap; }

  private:
    double m_gap;
};

/// Eigensolver failed to converge.
class EigenSolverError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct EigResult {
    Vec eps; // ascending
    Mat C;   // S-orthonormal columns
};

/// (A + A^T) / 2
Mat symmetrize(const Mat &a);

/// Lower-triangular L with L L^T = S.
Mat cholesky(const Mat &S);

/// Solves H C = S C diag(eps) given L = cholesky(S). The largest-magnitude
/// entry of every eigenvector is made positive.
EigResult generalized_eigh(const Mat &H, const Mat &L);

/// L^{-1} H L^{-T}
Mat whiten(const Mat &H, const Mat &L);

/// Throws DegenerateGapError unless eps[n_occ] - eps[n_occ-1] > tol.
void check_gap(const EigResult &eig, int n_occ, double tol = kDefaultGapTolerance);

/// Closed-shell density 2 C_occ C_occ^T.
Mat occupied_density(const EigResult &eig, int n_occ);

/// Pulls dE/drho = G back through rho(H) = 2 C_occ C_occ^T to a symmetric
/// dE/dH. Only occupied-virtual rotations contribute, so degeneracies inside
/// either block are harmless; a vanishing gap between them is an error.
Mat density_adjoint(const EigResult &eig, int n_occ, const Mat &G,
                    double gap_tol = kDefaultGapTolerance);

} // namespace qpt
