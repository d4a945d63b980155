#include <doctest.h>

#include <qpt/basis.h>
#include <qpt/molecule.h>

#include <Eigen/Geometry>
#include <algorithm>
#include <random>
#include <set>

using namespace qpt;

namespace {

Eigen::Matrix3d random_rotation(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    return q.normalized().toRotationMatrix();
}

Molecule moved(const Molecule &m, const Eigen::Matrix3d &R, const Vec3 &shift) {
    Eigen::MatrixXd p = m.positions();
    for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) = (R * p.row(i).transpose() + shift).transpose();
    return m.with_positions(p);
}

} // namespace

TEST_CASE("parse_xyz converts Angstrom to Bohr") {
    const auto m = parse_xyz("2\n\nH 0 0 0\nH 0 0 0.74");
    REQUIRE(m.size() == 2);
    CHECK(m.atoms()[1].r.z() == doctest::Approx(0.74 * 1.88972612463).epsilon(1e-15));
    CHECK(m.atoms()[1].r.z() == doctest::Approx(1.398397).epsilon(1e-6));
    CHECK(m.n_electrons() == 2);

    CHECK(parse_xyz("1\n\nHe 0 0 0").n_electrons() == 2);
    const auto w = parse_xyz("3\n\nO 0 0 0\nH 0 0.757 0.587\nH 0 -0.757 0.587");
    CHECK(w.n_electrons() == 10);
    CHECK(w.n_occ() == 5);
}

TEST_CASE("parse_xyz rejects bad input") {
    CHECK_THROWS_AS(parse_xyz("1\n\nXx 0 0 0"), InputError);
    CHECK_THROWS_AS(parse_xyz("1\n\nNa 0 0 0"), InputError);
    CHECK_THROWS_AS(parse_xyz("1\n\nH 0 0"), InputError);
    CHECK_THROWS_AS(parse_xyz("2\n\nH 0 0 0"), InputError);
    CHECK_THROWS_AS(parse_xyz("2\n\nH 0 0 0\nH 0 0 0"), InputError);
    CHECK_THROWS_AS(parse_xyz("1\n\nH 0 0 0"), InputError); // odd electron count
    CHECK_NOTHROW(parse_xyz("1\n\nH 0 0 0", -1));
}

TEST_CASE("to_xyz round trip") {
    const auto w = builtin_molecule("h2o");
    const auto back = parse_xyz(to_xyz(w, "water"));
    CHECK((back.positions() - w.positions()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("canonicalize centers and diagonalizes") {
    for (const char *name : {"h2", "h2o", "h2o2", "lih"}) {
        const auto c = canonicalize(builtin_molecule(name));
        const Eigen::MatrixXd p = c.positions();
        const Eigen::RowVector3d mean = p.colwise().mean();
        CHECK(mean.cwiseAbs().maxCoeff() < 1e-12);
        const Eigen::Matrix3d cov = p.transpose() * p / double(p.rows());
        CHECK(std::abs(cov(0, 1)) < 1e-10);
        CHECK(std::abs(cov(0, 2)) < 1e-10);
        CHECK(std::abs(cov(1, 2)) < 1e-10);
        CHECK(cov(0, 0) >= cov(1, 1) - 1e-12);
        CHECK(cov(1, 1) >= cov(2, 2) - 1e-12);
    }
}

TEST_CASE("canonicalize puts a diatomic on the first axis") {
    const Molecule h2({{1, {0.3, -0.2, 0.1}}, {1, {1.1, 0.6, 1.0}}});
    const auto c = canonicalize(h2);
    const Eigen::MatrixXd p = c.positions();
    CHECK(p.col(1).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(p.col(2).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(p(0, 0) - p(1, 0)) == doctest::Approx(h2.min_distance()).epsilon(1e-12));
}

TEST_CASE("canonicalize is idempotent and invariant under rigid motions") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 3.0);
    for (const char *name : {"h2o", "h2o2", "heh+"}) {
        const auto ref = canonicalize(builtin_molecule(name));
        CHECK((canonicalize(ref).positions() - ref.positions()).cwiseAbs().maxCoeff() < 1e-10);
        for (int t = 0; t < 20; ++t) {
            const auto m = moved(builtin_molecule(name), random_rotation(rng), Vec3(n(rng), n(rng), n(rng)));
            CHECK((canonicalize(m).positions() - ref.positions()).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("single atom canonicalizes to the origin") {
    const Molecule he({{2, {1.0, 2.0, 3.0}}});
    CHECK(canonicalize(he).positions().cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("STO-3G AO counts") {
    CHECK(build_basis(builtin_molecule("h2")).n_ao() == 2);
    CHECK(build_basis(builtin_molecule("h2o")).n_ao() == 7);
    CHECK(build_basis(builtin_molecule("lih")).n_ao() == 6);
    CHECK(build_basis(builtin_molecule("h2o2")).n_ao() == 12);
    CHECK_THROWS(build_basis(builtin_molecule("h2"), "def2-svp"));
}

TEST_CASE("AO ordering follows atoms, shells, then x y z") {
    const auto b = build_basis(builtin_molecule("h2o"));
    const std::vector<int> atom{0, 0, 0, 0, 0, 1, 2};
    for (int i = 0; i < 7; ++i) CHECK(b.ao_atom(i) == atom[i]);
    CHECK(b.ao_powers(2) == std::array<int, 3>{1, 0, 0});
    CHECK(b.ao_powers(3) == std::array<int, 3>{0, 1, 0});
    CHECK(b.ao_powers(4) == std::array<int, 3>{0, 0, 1});
    CHECK(b.ao_label(4).ordinal == 5);
    CHECK(b.ao_label(6).ordinal == 1);
}

TEST_CASE("tokenize water and H2") {
    const auto w = canonicalize(builtin_molecule("h2o"));
    const auto tok = tokenize(build_basis(w), w);
    REQUIRE(tok.size() == 7);
    for (int i = 0; i < 5; ++i) {
        CHECK(tok.z_hat[i] == token_id(8, i + 1));
        CHECK((tok.r_hat[i] - w.atoms()[0].r).norm() == 0.0);
    }
    CHECK(tok.z_hat[5] == token_id(1, 1));
    CHECK(tok.z_hat[6] == token_id(1, 1));
    CHECK((tok.r_hat[6] - w.atoms()[2].r).norm() == 0.0);

    const auto h2 = canonicalize(builtin_molecule("h2"));
    const auto t2 = tokenize(build_basis(h2), h2);
    CHECK(t2.z_hat[0] == t2.z_hat[1]);
    CHECK((t2.r_hat[0] - t2.r_hat[1]).norm() > 1.0);
}

TEST_CASE("token ids are distinct per (element, ordinal) and fill the vocabulary") {
    std::set<int> ids;
    for (int z : {1, 2, 3, 6, 7, 8, 9})
        for (int o = 1; o <= ao_count(z); ++o) ids.insert(token_id(z, o));
    CHECK(ids.size() == size_t(token_vocab_size()));
    CHECK(*ids.begin() == 0);
    CHECK(*ids.rbegin() == token_vocab_size() - 1);
}

TEST_CASE("reordering atoms reorders tokens") {
    const auto w = builtin_molecule("h2o");
    const Molecule r({w.atoms()[1], w.atoms()[0], w.atoms()[2]});
    const auto a = tokenize(build_basis(w), w);
    const auto b = tokenize(build_basis(r), r);
    const std::vector<int> perm{5, 0, 1, 2, 3, 4, 6}; // b[i] = a[perm[i]]
    for (int i = 0; i < 7; ++i) {
        CHECK(b.z_hat[i] == a.z_hat[perm[i]]);
        CHECK((b.r_hat[i] - a.r_hat[perm[i]]).norm() == 0.0);
    }
}

TEST_CASE("basis dump has one line per shell") {
    const auto text = dump_basis(build_basis(builtin_molecule("h2o")));
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
    CHECK(text.rfind("0 0 130.70932 0.15432897", 0) == 0);
}
