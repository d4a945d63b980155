#pragma once
#include <qpt/basis.h>
#include <qpt/molecule.h>

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace qpt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr double kDefaultEriThreshold = 1e-7;

/// One canonical representative (ij|kl) with i>=j, k>=l, ij>=kl (chemists' notation).
struct EriEntry {
    uint16_t i, j, k, l;
    double value;
};

/// Canonical compound index of an unordered pair.
inline int64_t pair_index(int64_t i, int64_t j) {
    return i >= j ? i * (i + 1) / 2 + j : j * (j + 1) / 2 + i;
}

struct OneElectron {
    Mat S, T, V;
};

/// The fixed per-molecule tensors the energy needs.
struct IntegralSet {
    Mat S;
    Mat T;
    Mat Vn;
    Mat H_core;
    std::vector<EriEntry> eri; // sorted by (ij, kl)
    double e_nuc{0.0};
    double threshold{kDefaultEriThreshold};

    int n_ao() const { return static_cast<int>(S.rows()); }
};

/// Overlap, kinetic and nuclear-attraction matrices (McMurchie-Davidson).
OneElectron one_electron_matrices(const AOBasis &basis, const Molecule &mol);

/// Canonical two-electron integrals with |value| >= threshold.
std::vector<EriEntry> eri_tensor(const AOBasis &basis, double threshold = kDefaultEriThreshold);

/// Sum over atom pairs of z_m z_n / |r_m - r_n|.
double nuclear_repulsion(const Molecule &mol);

IntegralSet compute_integrals(const AOBasis &basis, const Molecule &mol,
                              double threshold = kDefaultEriThreshold);

/// Invokes f(p, q, r, s) once for each distinct index permutation of (ij|kl)
/// under the 8-fold symmetry.
template <typename F> void for_each_permutation(const EriEntry &e, F &&f) {
    const int i = e.i, j = e.j, k = e.k, l = e.l;
    const int perms[8][4] = {{i, j, k, l}, {j, i, k, l}, {i, j, l, k}, {j, i, l, k},
                             {k, l, i, j}, {l, k, i, j}, {k, l, j, i}, {l, k, j, i}};
    for (int a = 0; a < 8; ++a) {
        bool seen = false;
        for (int b = 0; b < a && !seen; ++b)
            seen = perms[a][0] == perms[b][0] && perms[a][1] == perms[b][1] &&
                   perms[a][2] == perms[b][2] && perms[a][3] == perms[b][3];
        if (!seen) f(perms[a][0], perms[a][1], perms[a][2], perms[a][3]);
    }
}

/// Row-major CSV with 17 significant digits.
std::string matrix_csv(const Mat &m);
/// "i j k l value" per line.
std::string eri_text(const std::vector<EriEntry> &eri);

} // namespace qpt
