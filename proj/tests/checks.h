// Helpers shared by the unit tests and the acceptance runner.
#pragma once
#include <qpt/conformer.h>
#include <qpt/example.h>
#include <qpt/model.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace checks {

using qpt::Mat;

inline Mat random_symmetric(int n, std::mt19937_64 &rng, double scale) {
    std::normal_distribution<double> nd(0.0, scale);
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = nd(rng);
    return a;
}

// Central differences over the independent entries of a symmetric H, in the
// convention dE = sum g .* dH.
template <typename F> Mat fd_gradient(F &&f, const Mat &H, double h) {
    const int n = static_cast<int>(H.rows());
    Mat g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            Mat Hp = H, Hm = H;
            Hp(i, j) += h;
            Hm(i, j) -= h;
            if (i != j) {
                Hp(j, i) += h;
                Hm(j, i) -= h;
            }
            const double d = (f(Hp) - f(Hm)) / (2.0 * h);
            g(i, j) = g(j, i) = i == j ? d : 0.5 * d;
        }
    return g;
}

// Sixth-order central differences: two Richardson levels over steps h, 2h, 4h.
template <typename F> Mat fd_gradient_richardson(F &&f, const Mat &H, double h) {
    const Mat g1 = fd_gradient(f, H, h), g2 = fd_gradient(f, H, 2.0 * h), g4 = fd_gradient(f, H, 4.0 * h);
    const Mat r1 = (4.0 * g1 - g2) / 3.0, r2 = (4.0 * g2 - g4) / 3.0;
    return (16.0 * r1 - r2) / 15.0;
}

inline double rel_err(const Mat &a, const Mat &ref) {
    return (a - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff();
}

inline qpt::Example water_example() {
    return qpt::make_example({qpt::canonicalize(qpt::builtin_molecule("h2o")), {0.0, 0.0}});
}

inline qpt::ModelConfig small_model(qpt::Precision p, uint64_t seed = 3) {
    qpt::ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.n_biased_heads = 3;
    cfg.precision = p;
    cfg.seed = seed;
    return cfg;
}

// Scalar loss sum(G .* A) evaluated in double precision.
inline double model_loss(const qpt::ModelConfig &cfg, const qpt::ParamSet<double> &p,
                         const qpt::Example &ex, const Mat &G) {
    const auto A = qpt::forward(cfg, p, ex.tokens, ex.bias);
    return G.cwiseProduct(Mat(A)).sum();
}

// Analytic gradient of sum(G .* A) in precision T against double-precision
// central differences, at `n_samples` random scalar parameters. Returns the
// largest error relative to max(|fd|, floor * max|fd| over the samples).
template <typename T>
double model_fd_error(const qpt::ModelConfig &cfg, const qpt::Example &ex, int n_samples, uint64_t seed,
                      double step = 1e-5, double floor = 1e-2) {
    std::mt19937_64 rng(seed);
    auto params = qpt::init_params<T>(cfg);
    // Move gains and norms off their initial values so every path is exercised.
    std::normal_distribution<double> nd(0.0, 0.2);
    for (auto &t : params.tensors)
        for (auto &v : t.data) v += static_cast<T>(nd(rng) * (t.decay ? 0.1 : 1.0));
    const int n = ex.ints.n_ao();
    Mat G = random_symmetric(n, rng, 1.0);
    const auto grads = qpt::backward(cfg, params, ex.tokens, ex.bias, G);

    auto p64 = qpt::cast_params<double>(params);
    auto cfg64 = cfg;
    cfg64.precision = qpt::Precision::f64;
    std::vector<std::pair<double, double>> pairs;
    std::uniform_int_distribution<size_t> pick_t(0, params.tensors.size() - 1);
    for (int s = 0; s < n_samples; ++s) {
        const size_t ti = pick_t(rng);
        std::uniform_int_distribution<size_t> pick_i(0, params.tensors[ti].data.size() - 1);
        const size_t idx = pick_i(rng);
        double &x = p64.tensors[ti].data[idx];
        const double x0 = x;
        x = x0 + step;
        const double lp = model_loss(cfg64, p64, ex, G);
        x = x0 - step;
        const double lm = model_loss(cfg64, p64, ex, G);
        x = x0;
        pairs.emplace_back(static_cast<double>(grads.tensors[ti].data[idx]), (lp - lm) / (2.0 * step));
    }
    double scale = 0.0;
    for (auto [g, f] : pairs) scale = std::max(scale, std::abs(f));
    double worst = 0.0;
    for (auto [g, f] : pairs) worst = std::max(worst, std::abs(g - f) / std::max(std::abs(f), floor * scale));
    return worst;
}

} // namespace checks
