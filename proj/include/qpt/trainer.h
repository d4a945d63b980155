#pragma once
#include <qpt/config.h>
#include <qpt/example.h>
#include <qpt/scf.h>

#include <functional>
#include <optional>
#include <string>

namespace qpt {

template <typename T> struct TrainState {
    ParamSet<T> params;
    ParamSet<T> m, v; // Adam moments
    int64_t step{0};
    uint64_t draw{0};   // conformer draws consumed, including skipped ones
    int64_t skipped{0}; // draws skipped for a degenerate gap
};

template <typename T> TrainState<T> init_train_state(const TrainConfig &cfg);

struct StepMetrics {
    int64_t step{0}; // step count after the update
    double lr{0.0};
    int n_iter{1};
    double loss_hartree{0.0};
    double loss_ev{0.0};
    int64_t skipped{0};
    double wall_ms{0.0};
};

/// Example id used by draw `d` when each example is reused `window` times.
uint64_t example_id_for_draw(uint64_t d, int window);

/// One implicit-loss update on `ex`: loss = E(X; H_init + A), gradient through
/// the energy into the model. Throws DegenerateGapError without touching the
/// state when the predicted Hamiltonian has a vanishing gap.
template <typename T>
StepMetrics train_step(TrainState<T> &state, const TrainConfig &cfg, const Example &ex);

/// One supervised update with loss MAE(H - H*) + RMSE(H - H*).
template <typename T>
StepMetrics supervised_step(TrainState<T> &state, const TrainConfig &cfg, const Example &ex,
                            const Mat &H_star);

/// MAE + RMSE between two matrices and its gradient with respect to `H`.
struct SupervisedLoss {
    double value{0.0};
    Mat grad;
};
SupervisedLoss supervised_loss(const Mat &H, const Mat &H_star);

class TrainingAborted : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

template <typename T> struct RunOptions {
    std::string out_dir;             // empty: no files are written
    std::optional<int64_t> stop_at;  // stop early at this step
    int n_workers{-1};               // -1: producer_threads()
    bool quiet{true};
    std::function<void(const TrainState<T> &, const StepMetrics &)> on_step;
};

template <typename T> struct RunResult {
    TrainState<T> state;
    std::vector<StepMetrics> log;
    int64_t bound_checks{0};
};

/// Runs (or resumes) training to total_steps. With an out_dir it writes
/// metrics.csv and ckpt_<step> every checkpoint_every steps and at the end.
template <typename T>
RunResult<T> run_training(const TrainConfig &cfg, const RunOptions<T> &opts = {},
                          std::optional<TrainState<T>> resume = std::nullopt);

/// Metrics CSV header and row formatting.
std::string metrics_header();
std::string metrics_row(const StepMetrics &m);

} // namespace qpt
