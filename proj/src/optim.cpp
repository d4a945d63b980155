#include <qpt/optim.h>

#include <cmath>
#include <numbers>

namespace qpt {

double lr_schedule(int64_t step, double lr_max, double lr_min, int64_t warmup_steps,
                   int64_t total_steps) {
    if (step < 0) throw std::invalid_argument("lr_schedule: negative step");
    if (step < warmup_steps) return lr_max * double(step) / double(warmup_steps);
    if (step >= total_steps) return lr_min;
    const double progress = double(step - warmup_steps) / double(total_steps - warmup_steps);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
void adamw_update(ParamSet<T> &params, ParamSet<T> &m, ParamSet<T> &v, const ParamSet<T> &grads,
                  int64_t t, double lr, const AdamConfig &cfg) {
    if (t < 1) throw std::invalid_argument("adamw_update: step count starts at 1");
    const size_t n = params.tensors.size();
    if (m.tensors.size() != n || v.tensors.size() != n || grads.tensors.size() != n)
        throw std::invalid_argument("adamw_update: parameter sets differ in layout");
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
    for (size_t k = 0; k < n; ++k) {
        auto &p = params.tensors[k].data;
        auto &mk = m.tensors[k].data;
        auto &vk = v.tensors[k].data;
        const auto &g = grads.tensors[k].data;
        const double decay = params.tensors[k].decay ? cfg.weight_decay : 0.0;
        for (size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i];
            const double mi = cfg.beta1 * mk[i] + (1.0 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * vk[i] + (1.0 - cfg.beta2) * gi * gi;
            mk[i] = T(mi);
            vk[i] = T(vi);
            double pi = double(p[i]) * (1.0 - lr * decay);
            pi -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
            p[i] = T(pi);
        }
    }
}

template void adamw_update<float>(ParamSet<float> &, ParamSet<float> &, ParamSet<float> &,
                                  const ParamSet<float> &, int64_t, double, const AdamConfig &);
template void adamw_update<double>(ParamSet<double> &, ParamSet<double> &, ParamSet<double> &,
                                   const ParamSet<double> &, int64_t, double, const AdamConfig &);

} // namespace qpt
