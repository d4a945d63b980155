#pragma once
#include <qpt/energy.h>

namespace qpt {

struct ScfOptions {
    double tol_e{1e-10};
    double tol_commutator{1e-7};
    int max_iter{200};
    int diis_size{8};
    int damping_iters{3};
    double damping{0.5};
    double c_x{1.0};
};

struct ScfResult {
    double e_total{0.0};
    Mat H_star;
    Mat rho_star;
    Vec eps_star;
    Mat C_star;
    int n_iterations{0};
    bool converged{false};
    double commutator_norm{0.0}; // max-abs of F rho S - S rho F at exit
    int energy_rises{0};         // energy increases observed after damping ended
};

/// Converged closed-shell SCF from the core guess, DIIS-accelerated.
/// Non-convergence is reported via `converged`, not thrown.
ScfResult scf_converge(const IntegralSet &ints, int n_occ, const ScfOptions &opts = {});

/// Global minimum of the energy over single-orbital densities of a two-AO
/// system, by an angle scan of the S-orthonormal occupied orbital followed by
/// golden-section refinement. Returns the total energy.
double brute_force_min_2ao(const IntegralSet &ints, int grid_points = 1000000);

/// Occupied orbital coefficients at angle theta for a two-AO system.
Vec orbital_at_angle(const Mat &L, double theta);

} // namespace qpt
