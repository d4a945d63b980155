// Reference values computed without the library's integral machinery:
// Gauss-Legendre quadrature and truncated multivariate Taylor jets.
#pragma once
#include <qpt/basis.h>
#include <qpt/integrals.h>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

using qpt::Mat;

struct Rule {
    std::vector<double> x, w;
};

// n-point Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
inline Rule gauss_legendre(int n) {
    Rule r{std::vector<double>(n), std::vector<double>(n)};
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        r.x[i] = x;
        r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

// Composite rule: `panels` copies of an n-point rule over [a, b].
template <typename F> double integrate(F &&f, double a, double b, int panels = 24, int n = 12) {
    static thread_local std::vector<Rule> cache(64);
    if (cache[n].x.empty()) cache[n] = gauss_legendre(n);
    const auto &r = cache[n];
    const double h = (b - a) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        for (int i = 0; i < n; ++i) sum += r.w[i] * 0.5 * h * f(lo + 0.5 * h * (r.x[i] + 1.0));
    }
    return sum;
}

// F_m(t) = int_0^1 u^{2m} exp(-t u^2) du
inline double boys_quadrature(int m, double t) {
    return integrate([&](double u) { return std::pow(u, 2 * m) * std::exp(-t * u * u); }, 0.0, 1.0, 40, 16);
}

// Bare Cartesian primitive factor along one axis: (x - A)^i exp(-a (x - A)^2)
struct Factor {
    double A, a;
    int i;
    double operator()(double x) const {
        const double u = x - A;
        return std::pow(u, i) * std::exp(-a * u * u);
    }
    double second_derivative(double x) const {
        const double u = x - A;
        double poly = -2.0 * a * (2 * i + 1) * std::pow(u, i) + 4.0 * a * a * std::pow(u, i + 2);
        if (i >= 2) poly += i * (i - 1) * std::pow(u, i - 2);
        return poly * std::exp(-a * u * u);
    }
};

// int f(x) g(x) exp(-c (x - C)^2) dx over a window holding the product Gaussian
template <typename G>
double axis_integral(const Factor &f, const Factor &g, G &&gfun, double c = 0.0, double C = 0.0) {
    const double q = f.a + g.a + c;
    const double center = (f.a * f.A + g.a * g.A + c * C) / q;
    const double half = 13.0 / std::sqrt(q);
    return integrate([&](double x) { return f(x) * gfun(x) * std::exp(-c * (x - C) * (x - C)); },
                     center - half, center + half);
}

struct Primitive {
    std::array<Factor, 3> axes;
    double coef;
};

inline std::vector<Primitive> primitives(const qpt::AOBasis &basis, int ao) {
    const auto &sh = basis.shells()[basis.ao_shell(ao)];
    const auto pw = basis.ao_powers(ao);
    std::vector<Primitive> out;
    for (size_t k = 0; k < sh.exponents.size(); ++k) {
        Primitive p;
        for (int d = 0; d < 3; ++d) p.axes[d] = Factor{sh.center(d), sh.exponents[k], pw[d]};
        p.coef = sh.norm_coefficients[k];
        out.push_back(p);
    }
    return out;
}

struct OneElectron {
    Mat S, T, V;
};

// S, T, V by tensor-product Gauss-Legendre quadrature in x, y, z. The nuclear
// attraction uses 1/r = 2/sqrt(pi) int_0^inf exp(-r^2 t^2) dt, with the t
// integral done numerically after the substitution t = sqrt(p) s / (1 - s).
inline OneElectron one_electron(const qpt::AOBasis &basis, const std::vector<qpt::Atom> &atoms) {
    const int n = basis.n_ao();
    OneElectron out{Mat::Zero(n, n), Mat::Zero(n, n), Mat::Zero(n, n)};
    for (int mu = 0; mu < n; ++mu)
        for (int nu = 0; nu <= mu; ++nu) {
            double s = 0.0, t = 0.0, v = 0.0;
            for (const auto &pa : primitives(basis, mu))
                for (const auto &pb : primitives(basis, nu)) {
                    const double c = pa.coef * pb.coef;
                    std::array<double, 3> ov{}, lap{};
                    for (int d = 0; d < 3; ++d) {
                        const auto &fb = pb.axes[d];
                        ov[d] = axis_integral(pa.axes[d], fb, [&](double x) { return fb(x); });
                        lap[d] = axis_integral(pa.axes[d], fb, [&](double x) { return fb.second_derivative(x); });
                    }
                    s += c * ov[0] * ov[1] * ov[2];
                    t += c * -0.5 * (lap[0] * ov[1] * ov[2] + ov[0] * lap[1] * ov[2] + ov[0] * ov[1] * lap[2]);
                    const double p = pa.axes[0].a + pb.axes[0].a;
                    for (const auto &atom : atoms) {
                        auto integrand = [&](double sv) {
                            const double scale = std::sqrt(p);
                            const double tt = scale * sv / (1.0 - sv);
                            const double jac = scale / ((1.0 - sv) * (1.0 - sv));
                            double prod = 1.0;
                            for (int d = 0; d < 3; ++d) {
                                const auto &fb = pb.axes[d];
                                prod *= axis_integral(pa.axes[d], fb, [&](double x) { return fb(x); }, tt * tt,
                                                      atom.r(d));
                            }
                            return prod * jac;
                        };
                        const double inv_r = 2.0 / std::sqrt(std::numbers::pi) *
                                             integrate(integrand, 0.0, 1.0 - 1e-12, 48, 12);
                        v -= c * atom.z * inv_r;
                    }
                }
            out.S(mu, nu) = out.S(nu, mu) = s;
            out.T(mu, nu) = out.T(nu, mu) = t;
            out.V(mu, nu) = out.V(nu, mu) = v;
        }
    return out;
}

// Multilinear jet in up to four nilpotent variables (eps_k^2 = 0). c[mask]
// holds the mixed partial derivative over the variables in `mask`.
struct Jet {
    std::array<double, 16> c{};

    Jet() = default;
    Jet(double v) { c[0] = v; }
    static Jet var(double v, int k) {
        Jet j(v);
        j.c[1 << k] = 1.0;
        return j;
    }
    friend Jet operator+(const Jet &a, const Jet &b) {
        Jet r;
        for (int m = 0; m < 16; ++m) r.c[m] = a.c[m] + b.c[m];
        return r;
    }
    friend Jet operator-(const Jet &a, const Jet &b) {
        Jet r;
        for (int m = 0; m < 16; ++m) r.c[m] = a.c[m] - b.c[m];
        return r;
    }
    friend Jet operator*(const Jet &a, const Jet &b) {
        Jet r;
        for (int m = 0; m < 16; ++m)
            for (int s = m;; s = (s - 1) & m) {
                r.c[m] += a.c[s] * b.c[m ^ s];
                if (s == 0) break;
            }
        return r;
    }
};

// f(a + n) = sum_k f^(k)(a) n^k / k!, with derivs[k] = f^(k)(a)
inline Jet compose(const Jet &x, const std::array<double, 5> &derivs) {
    Jet nil = x;
    nil.c[0] = 0.0;
    Jet out(derivs[0]), power(1.0);
    double fact = 1.0;
    for (int k = 1; k <= 4; ++k) {
        power = power * nil;
        fact *= k;
        Jet term = power;
        for (auto &v : term.c) v *= derivs[k] / fact;
        out = out + term;
    }
    return out;
}

inline Jet exp(const Jet &x) {
    const double e = std::exp(x.c[0]);
    return compose(x, {e, e, e, e, e});
}

inline Jet boys0(const Jet &t) {
    std::array<double, 5> d;
    for (int k = 0; k <= 4; ++k) d[k] = (k % 2 ? -1.0 : 1.0) * boys_quadrature(k, t.c[0]);
    return compose(t, d);
}

// (ab|cd) over bare s Gaussians with jet-valued centers.
inline Jet eri_ssss(const std::array<std::array<Jet, 3>, 4> &R, const std::array<double, 4> &e) {
    const double p = e[0] + e[1], q = e[2] + e[3];
    Jet ab2, cd2, pq2;
    for (int d = 0; d < 3; ++d) {
        const Jet dab = R[0][d] - R[1][d], dcd = R[2][d] - R[3][d];
        const Jet P = (R[0][d] * Jet(e[0]) + R[1][d] * Jet(e[1])) * Jet(1.0 / p);
        const Jet Q = (R[2][d] * Jet(e[2]) + R[3][d] * Jet(e[3])) * Jet(1.0 / q);
        const Jet dpq = P - Q;
        ab2 = ab2 + dab * dab;
        cd2 = cd2 + dcd * dcd;
        pq2 = pq2 + dpq * dpq;
    }
    const double pref = 2.0 * std::pow(std::numbers::pi, 2.5) / (p * q * std::sqrt(p + q));
    const Jet kab = exp(ab2 * Jet(-e[0] * e[1] / p));
    const Jet kcd = exp(cd2 * Jet(-e[2] * e[3] / q));
    return Jet(pref) * kab * kcd * boys0(pq2 * Jet(p * q / (p + q)));
}

// (mu nu | la si) with p functions obtained as center derivatives:
// (x - A) exp(-a |r - A|^2) = 1/(2a) d/dA_x exp(-a |r - A|^2).
inline double eri(const qpt::AOBasis &basis, int i, int j, int k, int l) {
    const std::array<int, 4> ao{i, j, k, l};
    std::array<std::vector<Primitive>, 4> prims;
    std::array<int, 4> dir{-1, -1, -1, -1};
    int mask = 0;
    for (int s = 0; s < 4; ++s) {
        prims[s] = primitives(basis, ao[s]);
        const auto pw = basis.ao_powers(ao[s]);
        for (int d = 0; d < 3; ++d)
            if (pw[d]) {
                dir[s] = d;
                mask |= 1 << s;
            }
    }
    double sum = 0.0;
    for (const auto &a : prims[0])
        for (const auto &b : prims[1])
            for (const auto &c : prims[2])
                for (const auto &d : prims[3]) {
                    const std::array<const Primitive *, 4> pr{&a, &b, &c, &d};
                    std::array<std::array<Jet, 3>, 4> R;
                    std::array<double, 4> e;
                    double coef = 1.0;
                    for (int s = 0; s < 4; ++s) {
                        e[s] = pr[s]->axes[0].a;
                        coef *= pr[s]->coef;
                        for (int x = 0; x < 3; ++x)
                            R[s][x] = x == dir[s] ? Jet::var(pr[s]->axes[x].A, s) : Jet(pr[s]->axes[x].A);
                        if (dir[s] >= 0) coef /= 2.0 * e[s];
                    }
                    sum += coef * eri_ssss(R, e).c[mask];
                }
    return sum;
}

} // namespace oracle
