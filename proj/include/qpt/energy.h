#pragma once
#include <qpt/integrals.h>
#include <qpt/linalg.h>

namespace qpt {

inline constexpr double kHartreeToEv = 27.211386245988;

struct EnergyConfig {
    int n_iter{1};
    double alpha{0.5};  // density mixing weight on the previous density
    double c_x{1.0};    // exact-exchange fraction
    bool final_purify{true};
    double gap_tol{kDefaultGapTolerance};

    void validate() const;
};

struct EnergyResult {
    double e_total{0.0};
    double e_elec{0.0};
    Mat rho;  // density the energy was evaluated on
    Mat fock; // last matrix that was diagonalized
    Vec eps;
    Mat C;
};

struct CoulombExchange {
    Mat J, K;
};

/// J_{mn} = sum rho_{ls} (mn|ls), K_{mn} = sum rho_{ls} (ml|ns) from the canonical list.
CoulombExchange coulomb_exchange(const Mat &rho, const std::vector<EriEntry> &eri);

/// H_core + J(rho) - c_x/2 K(rho)
Mat fock_build(const Mat &rho, const IntegralSet &ints, double c_x = 1.0);

/// tr(rho H_core) + 1/2 tr(rho J) - c_x/4 tr(rho K)
double electronic_energy(const Mat &rho, const IntegralSet &ints, double c_x = 1.0);

struct InitialGuess {
    Mat rho0;
    Mat H_init; // fock_build(rho0)
};

/// Core-Hamiltonian guess rho0 and H_init = H(rho0).
InitialGuess initial_guess(const IntegralSet &ints, int n_occ, double c_x = 1.0);

/// E(X; H): diagonalize H, then n_iter-1 mixed Fock iterations and an
/// optional unmixed purification iteration.
EnergyResult implicit_energy(const IntegralSet &ints, const Mat &H, int n_occ,
                             const EnergyConfig &cfg);

struct EnergyGradient {
    double e_total{0.0};
    Mat dE_dH; // symmetric
    EnergyResult result;
};

/// Value and exact reverse-mode gradient of implicit_energy with respect to H.
EnergyGradient implicit_energy_grad(const IntegralSet &ints, const Mat &H, int n_occ,
                                    const EnergyConfig &cfg);

} // namespace qpt
