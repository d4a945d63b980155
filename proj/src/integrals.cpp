#include <qpt/boys.h>
#include <qpt/integrals.h>

#include <algorithm>
#include <cmath>
#include <fmt/core.h>
#include <numbers>

namespace qpt {

namespace {

constexpr int kMaxL = 1;
constexpr int kMaxHermite = 4 * kMaxL;
// j runs two past kMaxL for the kinetic-energy Laplacian
using HermiteTable = std::array<std::array<std::array<double, 2 * kMaxL + 4>, kMaxL + 3>, kMaxL + 1>;

/// McMurchie-Davidson expansion coefficients E^{ij}_t along one axis,
/// including the Gaussian product prefactor.
void hermite_coefficients(int imax, int jmax, double a, double b, double xab, HermiteTable &E) {
    for (auto &plane : E)
        for (auto &row : plane) row.fill(0.0);
    const double p = a + b;
    const double mu = a * b / p;
    const double xpa = -b / p * xab;
    const double xpb = a / p * xab;
    const double inv2p = 0.5 / p;
    E[0][0][0] = std::exp(-mu * xab * xab);
    for (int i = 0; i <= imax; ++i) {
        for (int j = 0; j <= jmax; ++j) {
            if (i == 0 && j == 0) continue;
            const bool from_j = j > 0;
            const auto &prev = from_j ? E[i][j - 1] : E[i - 1][j];
            const double x = from_j ? xpb : xpa;
            const int tmax = i + j;
            for (int t = 0; t <= tmax; ++t) {
                double v = x * prev[t];
                if (t > 0) v += inv2p * prev[t - 1];
                if (t + 1 <= tmax - 1) v += (t + 1) * prev[t + 1];
                E[i][j][t] = v;
            }
        }
    }
}

/// Hermite Coulomb integrals R^0_{tuv}(p, PC) for t+u+v <= L.
struct HermiteCoulomb {
    double r[kMaxHermite + 1][kMaxHermite + 1][kMaxHermite + 1];

    void compute(int L, double p, const Vec3 &pc) {
        double rn[kMaxHermite + 1][kMaxHermite + 1][kMaxHermite + 1][kMaxHermite + 1];
        double f[kBoysMaxOrder + 1];
        boys_array(L, p * pc.squaredNorm(), f);
        double scale = 1.0;
        for (int n = 0; n <= L; ++n) {
            rn[n][0][0][0] = scale * f[n];
            scale *= -2.0 * p;
        }
        for (int n = L - 1; n >= 0; --n) {
            const int top = L - n;
            for (int t = 0; t <= top; ++t) {
                for (int u = 0; u + t <= top; ++u) {
                    for (int v = 0; v + u + t <= top; ++v) {
                        if (t + u + v == 0) continue;
                        const auto &up = rn[n + 1];
                        double val;
                        if (t > 0) {
                            val = pc.x() * up[t - 1][u][v];
                            if (t > 1) val += (t - 1) * up[t - 2][u][v];
                        } else if (u > 0) {
                            val = pc.y() * up[t][u - 1][v];
                            if (u > 1) val += (u - 1) * up[t][u - 2][v];
                        } else {
                            val = pc.z() * up[t][u][v - 1];
                            if (v > 1) val += (v - 1) * up[t][u][v - 2];
                        }
                        rn[n][t][u][v] = val;
                    }
                }
            }
        }
        for (int t = 0; t <= L; ++t)
            for (int u = 0; u + t <= L; ++u)
                for (int v = 0; v + u + t <= L; ++v) r[t][u][v] = rn[0][t][u][v];
    }
};

std::array<int, 3> component_powers(int l, int c) {
    if (l == 0) return {0, 0, 0};
    std::array<int, 3> p{0, 0, 0};
    p[c] = 1;
    return p;
}

struct PrimitivePair {
    double p;
    Vec3 P;
    double coef; // product of normalized contraction coefficients
    HermiteTable E[3];
};

struct ShellPair {
    int a, b; // shell indices, a >= b
    std::vector<PrimitivePair> prims;
};

ShellPair make_shell_pair(const AOBasis &basis, int sa, int sb, int extra_j) {
    const auto &A = basis.shells()[sa];
    const auto &B = basis.shells()[sb];
    ShellPair sp{sa, sb, {}};
    const Vec3 AB = A.center - B.center;
    for (size_t pa = 0; pa < A.exponents.size(); ++pa) {
        for (size_t pb = 0; pb < B.exponents.size(); ++pb) {
            const double a = A.exponents[pa], b = B.exponents[pb];
            PrimitivePair pp;
            pp.p = a + b;
            pp.P = (a * A.center + b * B.center) / pp.p;
            pp.coef = A.norm_coefficients[pa] * B.norm_coefficients[pb];
            for (int d = 0; d < 3; ++d)
                hermite_coefficients(A.l, B.l + extra_j, a, b, AB[d], pp.E[d]);
            sp.prims.push_back(pp);
        }
    }
    return sp;
}

} // namespace

OneElectron one_electron_matrices(const AOBasis &basis, const Molecule &mol) {
    const int n = basis.n_ao();
    OneElectron out{Mat::Zero(n, n), Mat::Zero(n, n), Mat::Zero(n, n)};
    const auto &shells = basis.shells();
    const int nsh = static_cast<int>(shells.size());

    for (int sa = 0; sa < nsh; ++sa) {
        for (int sb = 0; sb <= sa; ++sb) {
            const auto &A = shells[sa];
            const auto &B = shells[sb];
            const auto pair = make_shell_pair(basis, sa, sb, 2);
            for (int ca = 0; ca < A.size(); ++ca) {
                for (int cb = 0; cb < B.size(); ++cb) {
                    const auto pa = component_powers(A.l, ca);
                    const auto pb = component_powers(B.l, cb);
                    const int i = A.first_ao + ca, j = B.first_ao + cb;
                    double s = 0.0, t = 0.0, v = 0.0;
                    for (size_t k = 0; k < pair.prims.size(); ++k) {
                        const auto &pp = pair.prims[k];
                        const double b = B.exponents[k % B.exponents.size()];
                        const double root = std::sqrt(std::numbers::pi / pp.p);
                        double s1[3], kin[3];
                        for (int d = 0; d < 3; ++d) {
                            const auto &E = pp.E[d];
                            const int ia = pa[d], jb = pb[d];
                            s1[d] = E[ia][jb][0] * root;
                            double lap = -2.0 * b * (2 * jb + 1) * E[ia][jb][0] +
                                         4.0 * b * b * E[ia][jb + 2][0];
                            if (jb >= 2) lap += jb * (jb - 1) * E[ia][jb - 2][0];
                            kin[d] = lap * root;
                        }
                        s += pp.coef * s1[0] * s1[1] * s1[2];
                        t += -0.5 * pp.coef *
                             (kin[0] * s1[1] * s1[2] + s1[0] * kin[1] * s1[2] +
                              s1[0] * s1[1] * kin[2]);

                        const int L = pa[0] + pa[1] + pa[2] + pb[0] + pb[1] + pb[2];
                        HermiteCoulomb R;
                        for (const auto &atom : mol.atoms()) {
                            R.compute(L, pp.p, pp.P - atom.r);
                            double acc = 0.0;
                            for (int tx = 0; tx <= pa[0] + pb[0]; ++tx)
                                for (int ty = 0; ty <= pa[1] + pb[1]; ++ty)
                                    for (int tz = 0; tz <= pa[2] + pb[2]; ++tz)
                                        acc += pp.E[0][pa[0]][pb[0]][tx] *
                                               pp.E[1][pa[1]][pb[1]][ty] *
                                               pp.E[2][pa[2]][pb[2]][tz] * R.r[tx][ty][tz];
                            v -= atom.z * pp.coef * 2.0 * std::numbers::pi / pp.p * acc;
                        }
                    }
                    out.S(i, j) = out.S(j, i) = s;
                    out.T(i, j) = out.T(j, i) = t;
                    out.V(i, j) = out.V(j, i) = v;
                }
            }
        }
    }
    return out;
}

std::vector<EriEntry> eri_tensor(const AOBasis &basis, double threshold) {
    if (!(threshold >= 0.0)) throw std::invalid_argument("eri_tensor: negative threshold");
    const auto &shells = basis.shells();
    const int nsh = static_cast<int>(shells.size());

    std::vector<ShellPair> pairs;
    for (int sa = 0; sa < nsh; ++sa)
        for (int sb = 0; sb <= sa; ++sb) pairs.push_back(make_shell_pair(basis, sa, sb, 0));

    const double pi52 = 2.0 * std::pow(std::numbers::pi, 2.5);
    std::vector<EriEntry> out;
    double buf[3][3][3][3];

    for (size_t bra = 0; bra < pairs.size(); ++bra) {
        for (size_t ket = 0; ket <= bra; ++ket) {
            const auto &PB = pairs[bra];
            const auto &PK = pairs[ket];
            const auto &A = shells[PB.a], &B = shells[PB.b];
            const auto &C = shells[PK.a], &D = shells[PK.b];
            const int L = A.l + B.l + C.l + D.l;
            std::fill(&buf[0][0][0][0], &buf[0][0][0][0] + 81, 0.0);

            HermiteCoulomb R;
            for (const auto &pp : PB.prims) {
                for (const auto &qq : PK.prims) {
                    const double alpha = pp.p * qq.p / (pp.p + qq.p);
                    R.compute(L, alpha, pp.P - qq.P);
                    const double pref =
                        pi52 / (pp.p * qq.p * std::sqrt(pp.p + qq.p)) * pp.coef * qq.coef;
                    for (int ca = 0; ca < A.size(); ++ca)
                        for (int cb = 0; cb < B.size(); ++cb) {
                            const auto a = component_powers(A.l, ca);
                            const auto b = component_powers(B.l, cb);
                            for (int cc = 0; cc < C.size(); ++cc)
                                for (int cd = 0; cd < D.size(); ++cd) {
                                    const auto c = component_powers(C.l, cc);
                                    const auto d = component_powers(D.l, cd);
                                    double acc = 0.0;
                                    for (int t = 0; t <= a[0] + b[0]; ++t)
                                        for (int u = 0; u <= a[1] + b[1]; ++u)
                                            for (int v = 0; v <= a[2] + b[2]; ++v) {
                                                const double eb = pp.E[0][a[0]][b[0]][t] *
                                                                  pp.E[1][a[1]][b[1]][u] *
                                                                  pp.E[2][a[2]][b[2]][v];
                                                if (eb == 0.0) continue;
                                                double inner = 0.0;
                                                for (int tau = 0; tau <= c[0] + d[0]; ++tau)
                                                    for (int nu = 0; nu <= c[1] + d[1]; ++nu)
                                                        for (int phi = 0; phi <= c[2] + d[2];
                                                             ++phi) {
                                                            const double ek =
                                                                qq.E[0][c[0]][d[0]][tau] *
                                                                qq.E[1][c[1]][d[1]][nu] *
                                                                qq.E[2][c[2]][d[2]][phi];
                                                            const double sign =
                                                                (tau + nu + phi) % 2 ? -1.0 : 1.0;
                                                            inner += sign * ek *
                                                                     R.r[t + tau][u + nu][v + phi];
                                                        }
                                                acc += eb * inner;
                                            }
                                    buf[ca][cb][cc][cd] += pref * acc;
                                }
                        }
                }
            }

            for (int ca = 0; ca < A.size(); ++ca)
                for (int cb = 0; cb < B.size(); ++cb)
                    for (int cc = 0; cc < C.size(); ++cc)
                        for (int cd = 0; cd < D.size(); ++cd) {
                            const int i = A.first_ao + ca, j = B.first_ao + cb;
                            const int k = C.first_ao + cc, l = D.first_ao + cd;
                            if (i < j || k < l || pair_index(i, j) < pair_index(k, l)) continue;
                            const double v = buf[ca][cb][cc][cd];
                            if (!(std::abs(v) >= threshold)) continue;
                            out.push_back({static_cast<uint16_t>(i), static_cast<uint16_t>(j),
                                           static_cast<uint16_t>(k), static_cast<uint16_t>(l),
                                           v});
                        }
        }
    }

    std::sort(out.begin(), out.end(), [](const EriEntry &x, const EriEntry &y) {
        const auto kx = std::pair(pair_index(x.i, x.j), pair_index(x.k, x.l));
        const auto ky = std::pair(pair_index(y.i, y.j), pair_index(y.k, y.l));
        return kx < ky;
    });
    return out;
}

double nuclear_repulsion(const Molecule &mol) {
    double e = 0.0;
    const auto &atoms = mol.atoms();
    for (size_t m = 0; m < atoms.size(); ++m) {
        for (size_t n = 0; n < m; ++n) {
            const double r = (atoms[m].r - atoms[n].r).norm();
            if (r <= 1e-6) throw InputError(fmt::format("atoms {} and {} coincide", n, m));
            e += atoms[m].z * atoms[n].z / r;
        }
    }
    return e;
}

IntegralSet compute_integrals(const AOBasis &basis, const Molecule &mol, double threshold) {
    auto one = one_electron_matrices(basis, mol);
    IntegralSet ints;
    ints.S = std::move(one.S);
    ints.T = std::move(one.T);
    ints.Vn = std::move(one.V);
    ints.H_core = ints.T + ints.Vn;
    ints.eri = eri_tensor(basis, threshold);
    ints.e_nuc = nuclear_repulsion(mol);
    ints.threshold = threshold;
    return ints;
}

std::string matrix_csv(const Mat &m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += fmt::format("{:.17g}", m(i, j));
        }
        out += '\n';
    }
    return out;
}

std::string eri_text(const std::vector<EriEntry> &eri) {
    std::string out;
    for (const auto &e : eri) out += fmt::format("{} {} {} {} {:.17g}\n", e.i, e.j, e.k, e.l, e.value);
    return out;
}

} // namespace qpt
