#pragma once
#include <qpt/molecule.h>

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace qpt {

struct Range {
    double lo{0.0}, hi{0.0};
    bool contains(double x) const { return x >= lo && x <= hi; }
    bool operator==(const Range &) const = default;
};

enum class ConformerMode { jitter, bond_scan, angle_grid };

std::string to_string(ConformerMode m);
ConformerMode parse_conformer_mode(std::string_view s);

/// Rotation of `moving` atoms by an angle in degrees. With two axis atoms
/// (a, b) the axis runs along a->b through a (a torsion); with three (a, b, c)
/// it is the normal of the plane a, b, c through b (a bend at b).
struct AngleCoordinate {
    std::vector<int> axis;
    std::vector<int> moving;
    Range train{0.0, 180.0};
    Range eval{180.0, 200.0};
    bool operator==(const AngleCoordinate &) const = default;
};

struct ConformerSpec {
    std::string template_name{"h2o"}; // builtin name or XYZ path
    Molecule templ{builtin_molecule("h2o")};
    ConformerMode mode{ConformerMode::jitter};
    double sigma{0.05}; // Bohr
    std::array<int, 2> bond_atoms{0, 1};
    Range bond_range{1.0, 1.8};
    Range bond_eval_range{1.8, 2.0};
    AngleCoordinate angle1, angle2;
    int eval_count{20};
    uint64_t eval_seed{1234567};

    void validate() const;
};

inline constexpr double kMinAtomDistance = 0.7;
inline constexpr int kMaxResamples = 1000;

class ResampleError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Conformer {
    Molecule mol; // canonicalized
    std::array<double, 2> coords{0.0, 0.0};
};

/// Template geometry with the spec's coordinates set to (c1, c2); c2 is
/// ignored outside angle_grid. Not canonicalized.
Molecule place_coordinates(const ConformerSpec &spec, double c1, double c2 = 0.0);

/// Draws one conformer from the training distribution.
Conformer sample_conformer(const ConformerSpec &spec, std::mt19937_64 &rng);
/// Conformer `id` of the stream seeded by `seed`; independent of draw order.
Conformer sample_conformer(const ConformerSpec &spec, uint64_t seed, uint64_t id);

/// Fixed evaluation conformers drawn with the spec's eval_seed.
std::vector<Conformer> eval_conformers(const ConformerSpec &spec);

} // namespace qpt
