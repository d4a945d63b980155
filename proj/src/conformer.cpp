#include <qpt/conformer.h>

#include <Eigen/Geometry>
#include <cmath>
#include <fmt/core.h>
#include <numbers>

namespace qpt {

std::string to_string(ConformerMode m) {
    switch (m) {
    case ConformerMode::jitter: return "gaussian_jitter";
    case ConformerMode::bond_scan: return "bond_scan";
    case ConformerMode::angle_grid: return "angle_grid";
    }
    return "?";
}

ConformerMode parse_conformer_mode(std::string_view s) {
    if (s == "gaussian_jitter" || s == "jitter") return ConformerMode::jitter;
    if (s == "bond_scan") return ConformerMode::bond_scan;
    if (s == "angle_grid") return ConformerMode::angle_grid;
    throw std::invalid_argument(fmt::format(
        "unknown conformer mode '{}' (expected gaussian_jitter, bond_scan or angle_grid)", s));
}

namespace {

void check_atom(const Molecule &m, int idx, const char *what) {
    if (idx < 0 || idx >= static_cast<int>(m.size()))
        throw std::invalid_argument(
            fmt::format("{}: atom index {} outside template with {} atoms", what, idx, m.size()));
}

void check_angle(const Molecule &m, const AngleCoordinate &a, const char *what) {
    if (a.axis.size() != 2 && a.axis.size() != 3)
        throw std::invalid_argument(fmt::format("{}: axis needs 2 or 3 atoms", what));
    if (a.moving.empty()) throw std::invalid_argument(fmt::format("{}: no moving atoms", what));
    for (int i : a.axis) check_atom(m, i, what);
    for (int i : a.moving) check_atom(m, i, what);
    if (a.train.lo > a.train.hi || a.eval.lo > a.eval.hi)
        throw std::invalid_argument(fmt::format("{}: empty range", what));
}

Eigen::MatrixXd rotate(const Eigen::MatrixXd &pos, const AngleCoordinate &a, double degrees) {
    const Vec3 pa = pos.row(a.axis[0]).transpose();
    const Vec3 pb = pos.row(a.axis[1]).transpose();
    Vec3 origin = pa, dir = pb - pa;
    if (a.axis.size() == 3) {
        const Vec3 pc = pos.row(a.axis[2]).transpose();
        origin = pb;
        dir = (pa - pb).cross(pc - pb);
    }
    if (dir.norm() < 1e-12) throw std::invalid_argument("rotation axis is degenerate");
    const Eigen::AngleAxisd rot(degrees * std::numbers::pi / 180.0, dir.normalized());
    Eigen::MatrixXd out = pos;
    for (int i : a.moving) out.row(i) = (origin + rot * (pos.row(i).transpose() - origin)).transpose();
    return out;
}

} // namespace

void ConformerSpec::validate() const {
    if (templ.size() == 0) throw std::invalid_argument("conformer spec: empty template molecule");
    if (eval_count < 0) throw std::invalid_argument("conformer spec: eval_count must be >= 0");
    switch (mode) {
    case ConformerMode::jitter:
        if (!(sigma >= 0.0)) throw std::invalid_argument("conformer spec: sigma must be >= 0");
        break;
    case ConformerMode::bond_scan:
        check_atom(templ, bond_atoms[0], "bond_atoms");
        check_atom(templ, bond_atoms[1], "bond_atoms");
        if (bond_atoms[0] == bond_atoms[1])
            throw std::invalid_argument("bond_atoms: the two atoms must differ");
        if (!(bond_range.lo > 0.0 && bond_range.lo <= bond_range.hi))
            throw std::invalid_argument("bond_range: need 0 < lo <= hi");
        break;
    case ConformerMode::angle_grid:
        check_angle(templ, angle1, "angle1");
        check_angle(templ, angle2, "angle2");
        break;
    }
}

Molecule place_coordinates(const ConformerSpec &spec, double c1, double c2) {
    Eigen::MatrixXd pos = spec.templ.positions();
    switch (spec.mode) {
    case ConformerMode::jitter: break;
    case ConformerMode::bond_scan: {
        const auto [i, j] = spec.bond_atoms;
        const Vec3 ri = pos.row(i).transpose();
        const Vec3 d = (pos.row(j).transpose() - ri).normalized();
        pos.row(j) = (ri + c1 * d).transpose();
        break;
    }
    case ConformerMode::angle_grid:
        pos = rotate(pos, spec.angle1, c1);
        pos = rotate(pos, spec.angle2, c2);
        break;
    }
    return spec.templ.with_positions(pos);
}

Conformer sample_conformer(const ConformerSpec &spec, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto uniform = [&](const Range &r) { return r.lo + (r.hi - r.lo) * unit(rng); };

    for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
        Conformer c;
        Eigen::MatrixXd pos;
        switch (spec.mode) {
        case ConformerMode::jitter:
            pos = spec.templ.positions();
            if (spec.sigma > 0.0)
                for (Eigen::Index i = 0; i < pos.rows(); ++i)
                    for (int k = 0; k < 3; ++k) pos(i, k) += spec.sigma * normal(rng);
            break;
        case ConformerMode::bond_scan:
            c.coords[0] = uniform(spec.bond_range);
            pos = place_coordinates(spec, c.coords[0]).positions();
            break;
        case ConformerMode::angle_grid:
            c.coords = {uniform(spec.angle1.train), uniform(spec.angle2.train)};
            pos = place_coordinates(spec, c.coords[0], c.coords[1]).positions();
            break;
        }
        Molecule m;
        try {
            m = spec.templ.with_positions(pos);
        } catch (const InputError &) {
            continue;
        }
        if (m.min_distance() <= kMinAtomDistance) continue;
        c.mol = canonicalize(m);
        return c;
    }
    throw ResampleError(fmt::format("no conformer with all distances above {} Bohr after {} draws",
                                    kMinAtomDistance, kMaxResamples));
}

Conformer sample_conformer(const ConformerSpec &spec, uint64_t seed, uint64_t id) {
    std::seed_seq seq{uint32_t(seed), uint32_t(seed >> 32), uint32_t(id), uint32_t(id >> 32)};
    std::mt19937_64 rng(seq);
    return sample_conformer(spec, rng);
}

std::vector<Conformer> eval_conformers(const ConformerSpec &spec) {
    std::vector<Conformer> out;
    out.reserve(spec.eval_count);
    for (int i = 0; i < spec.eval_count; ++i) out.push_back(sample_conformer(spec, spec.eval_seed, i));
    return out;
}

} // namespace qpt
