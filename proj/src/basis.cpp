#include <qpt/basis.h>

#include <cmath>
#include <fmt/core.h>
#include <numbers>

namespace qpt {

namespace {

struct ShellTable {
    int l;
    std::array<double, 3> exponents;
    std::array<double, 3> coefficients;
};

constexpr std::array<double, 3> k1s{0.15432897, 0.53532814, 0.44463454};
constexpr std::array<double, 3> k2s{-0.09996723, 0.39951283, 0.70011547};
constexpr std::array<double, 3> k2p{0.15591627, 0.60768372, 0.39195739};

// STO-3G, s and sp shells; sp shells split into an s and a p shell sharing exponents.
std::vector<ShellTable> sto3g_shells(int z) {
    auto row2 = [](std::array<double, 3> e1s, std::array<double, 3> e2sp) {
        return std::vector<ShellTable>{{0, e1s, k1s}, {0, e2sp, k2s}, {1, e2sp, k2p}};
    };
    switch (z) {
    case 1: return {{0, {3.42525091, 0.62391373, 0.16885540}, k1s}};
    case 2: return {{0, {6.36242139, 1.15892300, 0.31364979}, k1s}};
    case 3: return row2({16.1195750, 2.9362007, 0.7946505}, {0.6362897, 0.1478601, 0.0480887});
    case 6: return row2({71.6168370, 13.0450960, 3.5305122}, {2.9412494, 0.6834831, 0.2222899});
    case 7: return row2({99.1061690, 18.0523120, 4.8856602}, {3.7804559, 0.8784966, 0.2857144});
    case 8: return row2({130.7093200, 23.8088610, 6.4436083}, {5.0331513, 1.1695961, 0.3803890});
    case 9: return row2({166.6791300, 30.3608120, 8.2168207}, {6.4648032, 1.5022812, 0.4885885});
    default: throw InputError(fmt::format("sto-3g: no basis for atomic number {}", z));
    }
}

double primitive_norm(int l, double a) {
    const double s = std::pow(2.0 * a / std::numbers::pi, 0.75);
    return l == 0 ? s : s * 2.0 * std::sqrt(a);
}

std::vector<double> normalized_coefficients(int l, const std::vector<double> &exps,
                                            const std::vector<double> &coefs) {
    std::vector<double> d(exps.size());
    for (size_t i = 0; i < exps.size(); ++i) d[i] = coefs[i] * primitive_norm(l, exps[i]);
    double self = 0.0;
    for (size_t i = 0; i < exps.size(); ++i) {
        for (size_t j = 0; j < exps.size(); ++j) {
            const double p = exps[i] + exps[j];
            double s = std::pow(std::numbers::pi / p, 1.5);
            if (l == 1) s /= 2.0 * p;
            self += d[i] * d[j] * s;
        }
    }
    const double scale = 1.0 / std::sqrt(self);
    for (auto &v : d) v *= scale;
    return d;
}

// vocabulary layout: elements in table order, ao_count(z) consecutive ids each
constexpr std::array<int, 7> kVocabElements{1, 2, 3, 6, 7, 8, 9};

} // namespace

int ao_count(int z) {
    int n = 0;
    for (const auto &sh : sto3g_shells(z)) n += 2 * sh.l + 1;
    return n;
}

AOBasis::AOBasis(std::vector<Shell> shells, std::vector<int> atomic_numbers)
    : m_shells(std::move(shells)) {
    std::vector<int> ordinal(atomic_numbers.size(), 0);
    for (size_t s = 0; s < m_shells.size(); ++s) {
        auto &sh = m_shells[s];
        sh.first_ao = m_n_ao;
        for (int c = 0; c < sh.size(); ++c) {
            m_ao_atom.push_back(sh.atom);
            m_ao_shell.push_back(static_cast<int>(s));
            m_ao_label.push_back({atomic_numbers.at(sh.atom), ++ordinal.at(sh.atom)});
        }
        m_n_ao += sh.size();
    }
}

std::array<int, 3> AOBasis::ao_powers(int ao) const {
    const auto &sh = m_shells[m_ao_shell[ao]];
    if (sh.l == 0) return {0, 0, 0};
    std::array<int, 3> p{0, 0, 0};
    p[ao - sh.first_ao] = 1;
    return p;
}

AOBasis build_basis(const Molecule &mol, std::string_view name) {
    std::string lower(name);
    for (auto &c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower != "sto-3g" && lower != "sto3g")
        throw InputError(fmt::format("unsupported basis '{}' (only sto-3g is available)", name));

    std::vector<Shell> shells;
    std::vector<int> zs;
    for (size_t a = 0; a < mol.size(); ++a) {
        const auto &atom = mol.atoms()[a];
        zs.push_back(atom.z);
        for (const auto &t : sto3g_shells(atom.z)) {
            Shell sh;
            sh.atom = static_cast<int>(a);
            sh.l = t.l;
            sh.center = atom.r;
            sh.exponents.assign(t.exponents.begin(), t.exponents.end());
            sh.coefficients.assign(t.coefficients.begin(), t.coefficients.end());
            sh.norm_coefficients = normalized_coefficients(sh.l, sh.exponents, sh.coefficients);
            shells.push_back(std::move(sh));
        }
    }
    return AOBasis(std::move(shells), std::move(zs));
}

std::string dump_basis(const AOBasis &basis) {
    std::string out;
    for (const auto &sh : basis.shells()) {
        out += fmt::format("{} {}", sh.atom, sh.l);
        for (size_t i = 0; i < sh.exponents.size(); ++i)
            out += fmt::format(" {:.10g} {:.10g}", sh.exponents[i], sh.coefficients[i]);
        out += '\n';
    }
    return out;
}

int token_vocab_size() {
    int n = 0;
    for (int z : kVocabElements) n += ao_count(z);
    return n;
}

int token_id(int z, int ordinal) {
    int offset = 0;
    for (int el : kVocabElements) {
        const int count = ao_count(el);
        if (el == z) {
            if (ordinal < 1 || ordinal > count)
                throw InputError(fmt::format("AO ordinal {} out of range for Z={}", ordinal, z));
            return offset + ordinal - 1;
        }
        offset += count;
    }
    throw InputError(fmt::format("no tokens for atomic number {}", z));
}

TokenSequence tokenize(const AOBasis &basis, const Molecule &mol) {
    TokenSequence seq;
    seq.z_hat.reserve(basis.n_ao());
    seq.r_hat.reserve(basis.n_ao());
    for (int i = 0; i < basis.n_ao(); ++i) {
        const auto &label = basis.ao_label(i);
        seq.z_hat.push_back(token_id(label.z, label.ordinal));
        seq.r_hat.push_back(mol.atoms().at(basis.ao_atom(i)).r);
    }
    return seq;
}

} // namespace qpt
