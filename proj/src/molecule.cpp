#include <qpt/molecule.h>

#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <fmt/core.h>
#include <fstream>
#include <limits>
#include <sstream>

namespace qpt {

namespace {

constexpr std::array<std::pair<int, std::string_view>, 7> kElements{{
    {1, "H"}, {2, "He"}, {3, "Li"}, {6, "C"}, {7, "N"}, {8, "O"}, {9, "F"},
}};

constexpr double kMinSeparation = 1e-6;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

bool is_supported_element(int z) {
    for (const auto &[num, sym] : kElements)
        if (num == z) return true;
    return false;
}

int element_number(std::string_view symbol) {
    for (const auto &[num, sym] : kElements) {
        if (sym.size() != symbol.size()) continue;
        bool same = true;
        for (size_t i = 0; i < sym.size(); ++i)
            same &= std::tolower(static_cast<unsigned char>(sym[i])) ==
                    std::tolower(static_cast<unsigned char>(symbol[i]));
        if (same) return num;
    }
    throw InputError(fmt::format("unknown or unsupported element '{}'", symbol));
}

std::string element_symbol(int z) {
    for (const auto &[num, sym] : kElements)
        if (num == z) return std::string(sym);
    throw InputError(fmt::format("unsupported atomic number {}", z));
}

Molecule::Molecule(std::vector<Atom> atoms, int charge)
    : m_atoms(std::move(atoms)), m_charge(charge) {
    if (m_atoms.empty()) throw InputError("molecule has no atoms");
    int total_z = 0;
    for (const auto &a : m_atoms) {
        if (!is_supported_element(a.z))
            throw InputError(fmt::format("unsupported atomic number {}", a.z));
        if (!a.r.allFinite()) throw InputError("non-finite atom position");
        total_z += a.z;
    }
    m_n_electrons = total_z - charge;
    if (m_n_electrons < 0)
        throw InputError(fmt::format("charge {} exceeds nuclear charge {}", charge, total_z));
    if (m_n_electrons % 2 != 0)
        throw InputError(fmt::format(
            "odd electron count {} (only closed-shell molecules are supported)", m_n_electrons));
    for (size_t i = 0; i < m_atoms.size(); ++i)
        for (size_t j = 0; j < i; ++j)
            if ((m_atoms[i].r - m_atoms[j].r).norm() <= kMinSeparation)
                throw InputError(fmt::format("atoms {} and {} share a position", j, i));
}

Eigen::MatrixXd Molecule::positions() const {
    Eigen::MatrixXd pos(m_atoms.size(), 3);
    for (size_t i = 0; i < m_atoms.size(); ++i) pos.row(i) = m_atoms[i].r.transpose();
    return pos;
}

Molecule Molecule::with_positions(const Eigen::MatrixXd &pos) const {
    if (pos.rows() != static_cast<Eigen::Index>(m_atoms.size()) || pos.cols() != 3)
        throw InputError("position matrix shape does not match molecule");
    auto atoms = m_atoms;
    for (size_t i = 0; i < atoms.size(); ++i) atoms[i].r = pos.row(i).transpose();
    return Molecule(std::move(atoms), m_charge);
}

double Molecule::min_distance() const {
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < m_atoms.size(); ++i)
        for (size_t j = 0; j < i; ++j)
            best = std::min(best, (m_atoms[i].r - m_atoms[j].r).norm());
    return best;
}

Molecule parse_xyz(std::string_view text, int charge) {
    std::vector<std::string_view> lines;
    size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto end = nl == std::string_view::npos ? text.size() : nl;
        lines.push_back(text.substr(pos, end - pos));
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (lines.empty() || trim(lines[0]).empty()) throw InputError("xyz: missing atom count");

    int count = 0;
    {
        std::istringstream is{std::string(trim(lines[0]))};
        std::string rest;
        if (!(is >> count) || count <= 0 || (is >> rest))
            throw InputError(fmt::format("xyz: invalid atom count line '{}'", trim(lines[0])));
    }

    std::vector<Atom> atoms;
    for (size_t i = 2; i < lines.size(); ++i) {
        const auto line = trim(lines[i]);
        if (line.empty()) continue;
        std::istringstream is{std::string(line)};
        std::string sym, extra;
        double x, y, z;
        if (!(is >> sym >> x >> y >> z) || (is >> extra))
            throw InputError(fmt::format("xyz: malformed line {}: '{}'", i + 1, line));
        atoms.push_back({element_number(sym), Vec3(x, y, z) * kBohrPerAngstrom});
    }
    if (static_cast<int>(atoms.size()) != count)
        throw InputError(fmt::format("xyz: header declares {} atoms but {} were read", count,
                                     atoms.size()));
    return Molecule(std::move(atoms), charge);
}

Molecule read_xyz_file(const std::string &path, int charge) {
    std::ifstream in(path);
    if (!in) throw InputError(fmt::format("cannot open '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_xyz(ss.str(), charge);
}

std::string to_xyz(const Molecule &mol, std::string_view comment) {
    std::string out = fmt::format("{}\n{}\n", mol.size(), comment);
    for (const auto &a : mol.atoms()) {
        const Vec3 r = a.r / kBohrPerAngstrom;
        out += fmt::format("{:<2} {:.12f} {:.12f} {:.12f}\n", element_symbol(a.z), r.x(), r.y(),
                           r.z());
    }
    return out;
}

Molecule canonicalize(const Molecule &mol) {
    Eigen::MatrixXd pos = mol.positions();
    const Eigen::RowVector3d mean = pos.colwise().mean();
    pos.rowwise() -= mean;
    if (mol.size() == 1) return mol.with_positions(Eigen::MatrixXd::Zero(1, 3));

    const Eigen::Matrix3d cov = pos.transpose() * pos / static_cast<double>(mol.size());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    // eigenvalues ascending; reverse for nonincreasing variance
    Eigen::Matrix3d axes = solver.eigenvectors().rowwise().reverse();
    Eigen::MatrixXd out = pos * axes;

    const double scale = std::max(1.0, out.cwiseAbs().maxCoeff());
    const double tol = 1e-8 * scale;
    for (int k = 0; k < 3; ++k) {
        const auto col = out.col(k);
        const double third = col.array().cube().sum();
        double sign = 1.0;
        if (std::abs(third) > tol * scale * scale) {
            sign = third > 0 ? 1.0 : -1.0;
        } else {
            for (Eigen::Index i = 0; i < col.size(); ++i) {
                if (std::abs(col(i)) > tol) {
                    sign = col(i) > 0 ? 1.0 : -1.0;
                    break;
                }
            }
        }
        if (sign < 0) out.col(k) *= -1.0;
    }
    return mol.with_positions(out);
}

Molecule builtin_molecule(std::string_view name) {
    if (name == "h2") return Molecule({{1, {0, 0, 0}}, {1, {0, 0, 1.4}}});
    if (name == "heh+") return Molecule({{2, {0, 0, 0}}, {1, {0, 0, 1.4632}}}, 1);
    if (name == "lih") return Molecule({{3, {0, 0, 0}}, {1, {0, 0, 3.015}}});
    if (name == "h2o")
        return Molecule({{8, {0.0, -0.143225816552, 0.0}},
                         {1, {1.638036840407, 1.136548822547, 0.0}},
                         {1, {-1.638036840407, 1.136548822547, 0.0}}});
    if (name == "h2o2")
        return Molecule({{8, {0.0, 0.0, -1.37}},
                         {8, {0.0, 0.0, 1.37}},
                         {1, {1.8022, 0.0, -1.6877}},
                         {1, {-0.7616, 1.6333, 1.6877}}});
    throw InputError(fmt::format("unknown builtin molecule '{}'", name));
}

} // namespace qpt
