#include <qpt/scf.h>

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <fmt/core.h>
#include <limits>
#include <numbers>

namespace qpt {

namespace {

class Diis {
  public:
    explicit Diis(int size) : m_size(size) {}

    void push(Mat F, Mat err) {
        m_focks.push_back(std::move(F));
        m_errors.push_back(std::move(err));
        if (static_cast<int>(m_focks.size()) > m_size) {
            m_focks.pop_front();
            m_errors.pop_front();
        }
    }

    Mat extrapolate() const {
        const int m = static_cast<int>(m_focks.size());
        Mat B = Mat::Zero(m + 1, m + 1);
        Vec rhs = Vec::Zero(m + 1);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j <= i; ++j)
                B(i, j) = B(j, i) = m_errors[i].cwiseProduct(m_errors[j]).sum();
            B(i, m) = B(m, i) = -1.0;
        }
        rhs(m) = -1.0;
        const Vec c = B.completeOrthogonalDecomposition().solve(rhs);
        Mat F = Mat::Zero(m_focks.front().rows(), m_focks.front().cols());
        for (int i = 0; i < m; ++i) F += c(i) * m_focks[i];
        return F;
    }

  private:
    int m_size;
    std::deque<Mat> m_focks, m_errors;
};

} // namespace

ScfResult scf_converge(const IntegralSet &ints, int n_occ, const ScfOptions &opts) {
    if (n_occ < 1) throw std::invalid_argument("scf_converge: n_occ must be >= 1");
    const Mat L = cholesky(ints.S);
    const auto tri = L.triangularView<Eigen::Lower>();

    auto core = generalized_eigh(ints.H_core, L);
    check_gap(core, n_occ);
    Mat rho = occupied_density(core, n_occ);

    Diis diis(opts.diis_size);
    ScfResult res;
    double e_prev = std::numeric_limits<double>::quiet_NaN();
    Mat F;

    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        F = fock_build(rho, ints, opts.c_x);
        const double e = electronic_energy(rho, ints, opts.c_x) + ints.e_nuc;
        const Mat comm = F * rho * ints.S - ints.S * rho * F;
        res.commutator_norm = comm.cwiseAbs().maxCoeff();
        res.n_iterations = iter;

        if (iter > 1 && std::abs(e - e_prev) <= opts.tol_e &&
            res.commutator_norm <= opts.tol_commutator) {
            res.converged = true;
            break;
        }
        if (iter > opts.damping_iters + 1 && e > e_prev + 1e-12) ++res.energy_rises;
        e_prev = e;

        // error vector in the orthonormal basis: L^{-1} comm L^{-T}
        const Mat half = tri.solve(comm);
        diis.push(F, tri.solve(half.transpose()).transpose());

        if (iter <= opts.damping_iters) {
            const auto eig = generalized_eigh(F, L);
            check_gap(eig, n_occ);
            rho = opts.damping * rho + (1.0 - opts.damping) * occupied_density(eig, n_occ);
        } else {
            const auto eig = generalized_eigh(symmetrize(diis.extrapolate()), L);
            check_gap(eig, n_occ);
            rho = occupied_density(eig, n_occ);
        }
    }

    // the reported state is the density generated by the final Fock matrix
    const auto eig = generalized_eigh(F, L);
    check_gap(eig, n_occ);
    res.H_star = F;
    res.eps_star = eig.eps;
    res.C_star = eig.C;
    res.rho_star = occupied_density(eig, n_occ);
    res.e_total = electronic_energy(res.rho_star, ints, opts.c_x) + ints.e_nuc;
    return res;
}

Vec orbital_at_angle(const Mat &L, double theta) {
    const Eigen::Vector2d u(std::cos(theta), std::sin(theta));
    return L.transpose().triangularView<Eigen::Upper>().solve(u);
}

double brute_force_min_2ao(const IntegralSet &ints, int grid_points) {
    if (ints.n_ao() != 2)
        throw std::invalid_argument(
            fmt::format("brute_force_min_2ao: needs exactly 2 AOs, got {}", ints.n_ao()));
    if (grid_points < 3) throw std::invalid_argument("brute_force_min_2ao: grid too small");
    const Mat L = cholesky(ints.S);
    auto energy = [&](double theta) {
        const Vec c = orbital_at_angle(L, theta);
        return electronic_energy(2.0 * c * c.transpose(), ints);
    };

    const double h = std::numbers::pi / grid_points;
    double best = std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (int k = 0; k < grid_points; ++k) {
        const double e = energy(k * h);
        if (e < best) {
            best = e;
            best_k = k;
        }
    }

    // golden-section search on the bracketing cell pair
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = (best_k - 1) * h, b = (best_k + 1) * h;
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = energy(x1), f2 = energy(x2);
    while (b - a > 1e-12) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = energy(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = energy(x2);
        }
    }
    best = std::min({best, f1, f2});
    return best + ints.e_nuc;
}

} // namespace qpt
