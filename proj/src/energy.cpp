#include <qpt/energy.h>

#include <fmt/core.h>

namespace qpt {

void EnergyConfig::validate() const {
    if (n_iter < 1) throw std::invalid_argument(fmt::format("n_iter must be >= 1, got {}", n_iter));
    if (!(alpha >= 0.0 && alpha < 1.0))
        throw std::invalid_argument(fmt::format("alpha must lie in [0, 1), got {}", alpha));
}

CoulombExchange coulomb_exchange(const Mat &rho, const std::vector<EriEntry> &eri) {
    const Eigen::Index n = rho.rows();
    CoulombExchange out{Mat::Zero(n, n), Mat::Zero(n, n)};
    for (const auto &e : eri) {
        const double v = e.value;
        for_each_permutation(e, [&](int p, int q, int r, int s) {
            out.J(p, q) += v * rho(r, s);
            out.K(p, r) += v * rho(q, s);
        });
    }
    return out;
}

Mat fock_build(const Mat &rho, const IntegralSet &ints, double c_x) {
    if (rho.rows() != ints.n_ao() || rho.cols() != ints.n_ao())
        throw std::invalid_argument(fmt::format("fock_build: density is {}x{}, basis has {} AOs",
                                                rho.rows(), rho.cols(), ints.n_ao()));
    const auto jk = coulomb_exchange(rho, ints.eri);
    return symmetrize(ints.H_core + jk.J - 0.5 * c_x * jk.K);
}

double electronic_energy(const Mat &rho, const IntegralSet &ints, double c_x) {
    if (rho.rows() != ints.n_ao() || rho.cols() != ints.n_ao())
        throw std::invalid_argument("electronic_energy: density shape mismatch");
    const auto jk = coulomb_exchange(rho, ints.eri);
    return rho.cwiseProduct(ints.H_core).sum() + 0.5 * rho.cwiseProduct(jk.J).sum() -
           0.25 * c_x * rho.cwiseProduct(jk.K).sum();
}

InitialGuess initial_guess(const IntegralSet &ints, int n_occ, double c_x) {
    if (n_occ < 1) throw std::invalid_argument("initial_guess: n_occ must be >= 1");
    const Mat L = cholesky(ints.S);
    const auto eig = generalized_eigh(ints.H_core, L);
    check_gap(eig, n_occ);
    InitialGuess g;
    g.rho0 = occupied_density(eig, n_occ);
    g.H_init = fock_build(g.rho0, ints, c_x);
    return g;
}

namespace {

struct Iteration {
    EigResult eig;
    double alpha; // weight on the previous density; 0 for the first and purifying steps
};

struct Tape {
    std::vector<Iteration> iters;
    EnergyResult result;
};

Tape forward(const IntegralSet &ints, const Mat &H, int n_occ, const EnergyConfig &cfg) {
    cfg.validate();
    if (H.rows() != ints.n_ao() || H.cols() != ints.n_ao())
        throw std::invalid_argument("implicit_energy: H shape does not match the basis");
    const Mat L = cholesky(ints.S);
    Tape tape;

    auto step = [&](const Mat &F, double alpha, const Mat *prev) {
        auto eig = generalized_eigh(F, L);
        check_gap(eig, n_occ, cfg.gap_tol);
        Mat rho = occupied_density(eig, n_occ);
        if (prev && alpha != 0.0) rho = alpha * (*prev) + (1.0 - alpha) * rho;
        tape.result.fock = F;
        tape.result.eps = eig.eps;
        tape.result.C = eig.C;
        tape.iters.push_back({std::move(eig), prev ? alpha : 0.0});
        return rho;
    };

    Mat rho = step(symmetrize(H), 0.0, nullptr);
    for (int t = 2; t <= cfg.n_iter; ++t) rho = step(fock_build(rho, ints, cfg.c_x), cfg.alpha, &rho);
    if (cfg.final_purify) rho = step(fock_build(rho, ints, cfg.c_x), 0.0, &rho);

    tape.result.e_elec = electronic_energy(rho, ints, cfg.c_x);
    tape.result.e_total = tape.result.e_elec + ints.e_nuc;
    tape.result.rho = std::move(rho);
    return tape;
}

} // namespace

EnergyResult implicit_energy(const IntegralSet &ints, const Mat &H, int n_occ,
                             const EnergyConfig &cfg) {
    return forward(ints, H, n_occ, cfg).result;
}

EnergyGradient implicit_energy_grad(const IntegralSet &ints, const Mat &H, int n_occ,
                                    const EnergyConfig &cfg) {
    auto tape = forward(ints, H, n_occ, cfg);
    // dE/drho of the final density is its Fock matrix
    Mat rho_bar = fock_build(tape.result.rho, ints, cfg.c_x);
    Mat H_bar;
    for (size_t k = tape.iters.size(); k-- > 0;) {
        const auto &it = tape.iters[k];
        const Mat F_bar = density_adjoint(it.eig, n_occ, (1.0 - it.alpha) * rho_bar, cfg.gap_tol);
        if (k == 0) {
            H_bar = F_bar;
            break;
        }
        const auto jk = coulomb_exchange(F_bar, ints.eri);
        rho_bar = it.alpha * rho_bar + jk.J - 0.5 * cfg.c_x * jk.K;
    }
    EnergyGradient out;
    out.e_total = tape.result.e_total;
    out.dE_dH = symmetrize(H_bar);
    out.result = std::move(tape.result);
    return out;
}

} // namespace qpt
