#pragma once
#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qpt {

using Vec3 = Eigen::Vector3d;

inline constexpr double kBohrPerAngstrom = 1.88972612463;

/// Raised for malformed molecular input (bad XYZ, unknown element, coincident atoms).
class InputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Atom {
    int z{0};
    Vec3 r{Vec3::Zero()}; // Bohr
};

/// A closed-shell molecule. Positions are in Bohr.
class Molecule {
  public:
    Molecule() = default;
    /// Validates the atom list: supported elements, distinct positions,
    /// even electron count.
    Molecule(std::vector<Atom> atoms, int charge = 0);

    const std::vector<Atom> &atoms() const { return m_atoms; }
    size_t size() const { return m_atoms.size(); }
    int charge() const { return m_charge; }
    int n_electrons() const { return m_n_electrons; }
    int n_occ() const { return m_n_electrons / 2; }

    /// Positions as a (natoms x 3) matrix.
    Eigen::MatrixXd positions() const;
    /// Same atoms and charge with new positions; revalidates.
    Molecule with_positions(const Eigen::MatrixXd &pos) const;

    double min_distance() const;

  private:
    std::vector<Atom> m_atoms;
    int m_charge{0};
    int m_n_electrons{0};
};

bool is_supported_element(int z);
int element_number(std::string_view symbol);
std::string element_symbol(int z);

/// Parses an XYZ file (Angstrom) into a Molecule in Bohr.
Molecule parse_xyz(std::string_view text, int charge = 0);
Molecule read_xyz_file(const std::string &path, int charge = 0);
/// Writes an XYZ block with coordinates in Angstrom.
std::string to_xyz(const Molecule &mol, std::string_view comment = "");

/// Centers the molecule and rotates it onto its principal axes, largest
/// variance first. Axis signs are fixed so the third moment along each axis
/// is positive; when that vanishes, the first atom off the axis plane is put on
/// the positive side. Reflections are not removed.
Molecule canonicalize(const Molecule &mol);

/// Small named molecules used by tests, demos and configs ("h2", "heh+",
/// "h2o", "lih", "h2o2"). Geometries in Bohr, not canonicalized.
Molecule builtin_molecule(std::string_view name);

} // namespace qpt
