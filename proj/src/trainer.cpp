#include <qpt/checkpoint.h>
#include <qpt/trainer.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fmt/core.h>
#include <fstream>
#include <map>
#include <sstream>

namespace qpt {

template <typename T> TrainState<T> init_train_state(const TrainConfig &cfg) {
    TrainState<T> s;
    s.params = init_params<T>(cfg.model);
    s.m = s.params.zeros_like();
    s.v = s.params.zeros_like();
    return s;
}

uint64_t example_id_for_draw(uint64_t d, int window) {
    const uint64_t w = static_cast<uint64_t>(std::max(1, window));
    return (d / (w * w)) * w + d % w;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <typename T>
StepMetrics apply_update(TrainState<T> &state, const TrainConfig &cfg, const ForwardCache<T> &cache,
                         const Mat &dH, double loss, int n_iter, Clock::time_point t0) {
    if (!std::isfinite(loss) || !dH.allFinite())
        throw NonFiniteError(fmt::format("non-finite loss at step {}", state.step));
    const MatT<T> dA = dH.cast<T>();
    const auto grads = backward(cfg.model, state.params, cache, dA);
    const double lr = lr_schedule(state.step, cfg.lr_max, cfg.lr_min, cfg.warmup_steps, cfg.total_steps);
    adamw_update(state.params, state.m, state.v, grads, state.step + 1, lr, cfg.adam);
    if (!state.params.all_finite())
        throw NonFiniteError(fmt::format("non-finite parameters after step {}", state.step));
    ++state.step;

    StepMetrics m;
    m.step = state.step;
    m.lr = lr;
    m.n_iter = n_iter;
    m.loss_hartree = loss;
    m.loss_ev = loss * kHartreeToEv;
    m.skipped = state.skipped;
    m.wall_ms = elapsed_ms(t0);
    return m;
}

} // namespace

template <typename T>
StepMetrics train_step(TrainState<T> &state, const TrainConfig &cfg, const Example &ex) {
    const auto t0 = Clock::now();
    EnergyConfig ec = cfg.energy;
    ec.n_iter = cfg.n_iter_at(state.step);
    ForwardCache<T> cache;
    const Mat H = predict_hamiltonian(cfg.model, state.params, ex, &cache);
    const auto g = implicit_energy_grad(ex.ints, H, ex.n_occ, ec);
    return apply_update(state, cfg, cache, g.dE_dH, g.e_total, ec.n_iter, t0);
}

SupervisedLoss supervised_loss(const Mat &H, const Mat &H_star) {
    if (H.rows() != H_star.rows() || H.cols() != H_star.cols())
        throw std::invalid_argument("supervised_loss: shape mismatch");
    const Mat d = H - H_star;
    const double n = static_cast<double>(d.size());
    const double mae = d.cwiseAbs().sum() / n;
    const double rmse = std::sqrt(d.squaredNorm() / n);
    SupervisedLoss out;
    out.value = mae + rmse;
    out.grad = d.unaryExpr([](double x) { return double((x > 0) - (x < 0)); }) / n;
    if (rmse > 0.0) out.grad += d / (n * rmse);
    return out;
}

template <typename T>
StepMetrics supervised_step(TrainState<T> &state, const TrainConfig &cfg, const Example &ex,
                            const Mat &H_star) {
    const auto t0 = Clock::now();
    ForwardCache<T> cache;
    const Mat H = predict_hamiltonian(cfg.model, state.params, ex, &cache);
    const auto loss = supervised_loss(H, H_star);
    return apply_update(state, cfg, cache, loss.grad, loss.value, cfg.n_iter_at(state.step), t0);
}

std::string metrics_header() { return "step,lr,n_iter,loss_hartree,loss_ev,skipped_count,wall_ms"; }

std::string metrics_row(const StepMetrics &m) {
    return fmt::format("{},{:.17g},{},{:.17g},{:.17g},{},{:.3f}", m.step, m.lr, m.n_iter, m.loss_hartree,
                       m.loss_ev, m.skipped, m.wall_ms);
}

namespace {

// Keeps the header and the rows up to `step` of an existing metrics file.
std::string truncated_metrics(const std::string &path, int64_t step) {
    std::ifstream f(path);
    std::string out = metrics_header() + "\n";
    if (!f) return out;
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (std::stoll(line.substr(0, comma)) > step) break;
        out += line + "\n";
    }
    return out;
}

} // namespace

template <typename T>
RunResult<T> run_training(const TrainConfig &cfg, const RunOptions<T> &opts,
                          std::optional<TrainState<T>> resume) {
    cfg.validate();
    RunResult<T> res;
    res.state = resume ? std::move(*resume) : init_train_state<T>(cfg);
    auto &state = res.state;
    const uint64_t digest = config_digest(cfg);
    const int W = cfg.reuse_window;

    std::ofstream csv;
    auto checkpoint = [&](const std::string &name) {
        if (!opts.out_dir.empty())
            save_checkpoint((std::filesystem::path(opts.out_dir) / name).string(), cfg.model, digest, state);
    };
    if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        const auto path = (std::filesystem::path(opts.out_dir) / "metrics.csv").string();
        const auto kept = resume ? truncated_metrics(path, state.step) : metrics_header() + "\n";
        csv.open(path, std::ios::trunc);
        if (!csv) throw std::runtime_error(fmt::format("cannot write '{}'", path));
        csv << kept;
        csv.flush();
    }

    const int n_workers = opts.n_workers < 0 ? producer_threads() : opts.n_workers;
    const uint64_t block = uint64_t(W) * uint64_t(W);
    ExampleStream stream(cfg.data, cfg.seed, (state.draw / block) * W, cfg.energy.c_x, cfg.eri_threshold,
                         n_workers, std::max(W, 2 * n_workers));
    std::map<uint64_t, Example> cache;
    auto fetch = [&](uint64_t draw) -> const Example & {
        const uint64_t id = example_id_for_draw(draw, W);
        const uint64_t first = (draw / block) * W;
        std::erase_if(cache, [&](const auto &kv) { return kv.first < first; });
        while (stream.next_id() <= id) {
            Example ex = stream.next();
            cache.emplace(ex.id, std::move(ex));
        }
        return cache.at(id);
    };

    const int64_t skip_limit = cfg.total_steps; // abort when 100 * skipped exceeds this
    while (state.step < cfg.total_steps && !(opts.stop_at && state.step >= *opts.stop_at)) {
        const Example &ex = fetch(state.draw);
        StepMetrics m;
        try {
            if (ex.degenerate) throw DegenerateGapError(0.0, ex.n_occ);
            if (cfg.loss == LossMode::supervised) {
                const auto label = scf_converge(ex.ints, ex.n_occ, ScfOptions{.c_x = cfg.energy.c_x});
                if (!label.converged) throw DegenerateGapError(0.0, ex.n_occ);
                m = supervised_step(state, cfg, ex, label.H_star);
            } else {
                m = train_step(state, cfg, ex);
            }
        } catch (const DegenerateGapError &e) {
            ++state.draw;
            ++state.skipped;
            if (!opts.quiet) fmt::print(stderr, "step {}: skipped example {}: {}\n", state.step, ex.id, e.what());
            if (100 * state.skipped > skip_limit) {
                checkpoint(fmt::format("ckpt_{}", state.step));
                throw TrainingAborted(fmt::format("{} skipped examples exceed 1% of {} steps", state.skipped,
                                                  cfg.total_steps));
            }
            continue;
        } catch (const NonFiniteError &) {
            checkpoint(fmt::format("ckpt_{}", state.step));
            throw;
        }
        ++state.draw;

        const bool variational = cfg.energy.final_purify || m.n_iter == 1;
        if (cfg.loss == LossMode::implicit && variational && cfg.bound_check_every > 0 &&
            state.step % cfg.bound_check_every == 0) {
            const auto oracle = scf_converge(ex.ints, ex.n_occ, ScfOptions{.c_x = cfg.energy.c_x});
            if (oracle.converged) {
                ++res.bound_checks;
                if (m.loss_hartree < oracle.e_total - 1e-8) {
                    checkpoint(fmt::format("ckpt_{}", state.step));
                    throw TrainingAborted(fmt::format("step {}: loss {:.12f} below converged energy {:.12f}",
                                                      state.step, m.loss_hartree, oracle.e_total));
                }
            }
        }

        if (csv.is_open()) {
            csv << metrics_row(m) << "\n";
            csv.flush();
        }
        if (!opts.quiet && (state.step % 100 == 0 || state.step == cfg.total_steps))
            fmt::print("step {:>6}  n_iter {}  lr {:.3e}  loss {:.10f} Ha\n", m.step, m.n_iter, m.lr,
                       m.loss_hartree);
        res.log.push_back(m);
        if (opts.on_step) opts.on_step(state, m);
        if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0)
            checkpoint(fmt::format("ckpt_{}", state.step));
    }
    if (cfg.checkpoint_every == 0 || state.step % cfg.checkpoint_every != 0)
        checkpoint(fmt::format("ckpt_{}", state.step));
    return res;
}

#define QPT_INSTANTIATE(T)                                                                        \
    template TrainState<T> init_train_state<T>(const TrainConfig &);                              \
    template StepMetrics train_step<T>(TrainState<T> &, const TrainConfig &, const Example &);     \
    template StepMetrics supervised_step<T>(TrainState<T> &, const TrainConfig &, const Example &, \
                                            const Mat &);                                         \
    template RunResult<T> run_training<T>(const TrainConfig &, const RunOptions<T> &,             \
                                          std::optional<TrainState<T>>);

QPT_INSTANTIATE(float)
QPT_INSTANTIATE(double)

} // namespace qpt
