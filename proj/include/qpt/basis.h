#pragma once
#include <qpt/molecule.h>

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace qpt {

/// A contracted Cartesian Gaussian shell (l = 0 or 1) on one atom.
struct Shell {
    int atom{0};
    int l{0};
    Vec3 center{Vec3::Zero()};
    std::vector<double> exponents;
    /// contraction coefficients as tabulated (for normalized primitives)
    std::vector<double> coefficients;
    /// coefficients with primitive and contraction normalization folded in,
    /// multiplying the bare x^i y^j z^k exp(-a r^2) primitives
    std::vector<double> norm_coefficients;
    /// first AO index of this shell
    int first_ao{0};

    int size() const { return 2 * l + 1; }
};

struct AOLabel {
    int z{0};
    int ordinal{0}; // 1-based position of the AO within its atom
};

class AOBasis {
  public:
    AOBasis() = default;
    AOBasis(std::vector<Shell> shells, std::vector<int> atomic_numbers);

    const std::vector<Shell> &shells() const { return m_shells; }
    int n_ao() const { return m_n_ao; }
    int ao_atom(int ao) const { return m_ao_atom[ao]; }
    int ao_shell(int ao) const { return m_ao_shell[ao]; }
    const AOLabel &ao_label(int ao) const { return m_ao_label[ao]; }
    /// Cartesian exponents (lx, ly, lz) of AO `ao`.
    std::array<int, 3> ao_powers(int ao) const;

  private:
    std::vector<Shell> m_shells;
    std::vector<int> m_ao_atom, m_ao_shell;
    std::vector<AOLabel> m_ao_label;
    int m_n_ao{0};
};

/// Builds the basis for `mol`; only "sto-3g" is available.
AOBasis build_basis(const Molecule &mol, std::string_view name = "sto-3g");

/// One line per shell: "atom_idx l exp1 coef1 exp2 coef2 exp3 coef3".
std::string dump_basis(const AOBasis &basis);

/// Number of STO-3G AOs on element z.
int ao_count(int z);

struct TokenSequence {
    std::vector<int> z_hat;
    std::vector<Vec3> r_hat;
    size_t size() const { return z_hat.size(); }
};

/// Size of the (element, AO ordinal) token vocabulary over supported elements.
int token_vocab_size();
/// Token id for the `ordinal`-th AO (1-based) of element z.
int token_id(int z, int ordinal);

/// One token per AO, positioned at its atom.
TokenSequence tokenize(const AOBasis &basis, const Molecule &mol);

} // namespace qpt
