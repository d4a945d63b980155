#pragma once
#include <qpt/model.h>

#include <cstdint>

namespace qpt {

struct AdamConfig {
    double beta1{0.9};
    double beta2{0.95};
    double eps{1e-8};
    double weight_decay{0.1};
    bool operator==(const AdamConfig &) const = default;
};

/// Linear warmup from 0 to lr_max, cosine decay to lr_min at total_steps,
/// then constant.
double lr_schedule(int64_t step, double lr_max, double lr_min, int64_t warmup_steps,
                   int64_t total_steps);

/// One AdamW update (decoupled decay on tensors flagged `decay`). `t` is the
/// 1-based update count used for bias correction.
template <typename T>
void adamw_update(ParamSet<T> &params, ParamSet<T> &m, ParamSet<T> &v, const ParamSet<T> &grads,
                  int64_t t, double lr, const AdamConfig &cfg);

} // namespace qpt
