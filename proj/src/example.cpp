#include <qpt/example.h>

#include <algorithm>
#include <cstdlib>
#include <fmt/core.h>

namespace qpt {

Example make_example(Conformer conf, double c_x, double eri_threshold) {
    Example ex;
    ex.basis = build_basis(conf.mol);
    ex.tokens = tokenize(ex.basis, conf.mol);
    ex.ints = compute_integrals(ex.basis, conf.mol, eri_threshold);
    ex.n_occ = conf.mol.n_occ();
    ex.conformer = std::move(conf);
    try {
        ex.guess = initial_guess(ex.ints, ex.n_occ, c_x);
        ex.bias = build_bias_set(ex.ints, ex.guess, ex.tokens, c_x);
    } catch (const DegenerateGapError &e) {
        ex.degenerate = true;
        ex.error = e.what();
    }
    return ex;
}

template <typename T>
Mat predict_hamiltonian(const ModelConfig &cfg, const ParamSet<T> &params, const Example &ex,
                        ForwardCache<T> *cache) {
    if (ex.degenerate) throw DegenerateGapError(0.0, ex.n_occ);
    const MatT<T> A = forward(cfg, params, ex.tokens, ex.bias, cache);
    return ex.guess.H_init + A.template cast<double>();
}

template Mat predict_hamiltonian<float>(const ModelConfig &, const ParamSet<float> &,
                                        const Example &, ForwardCache<float> *);
template Mat predict_hamiltonian<double>(const ModelConfig &, const ParamSet<double> &,
                                         const Example &, ForwardCache<double> *);

int producer_threads() {
    if (const char *env = std::getenv("QPT_THREADS")) {
        char *end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n >= 0) return static_cast<int>(std::min(n, 64L));
    }
    return static_cast<int>(std::clamp(std::thread::hardware_concurrency(), 1u, 8u));
}

ExampleStream::ExampleStream(ConformerSpec spec, uint64_t seed, uint64_t start, double c_x,
                             double eri_threshold, int n_workers, int capacity)
    : m_spec(std::move(spec)), m_seed(seed), m_c_x(c_x), m_threshold(eri_threshold),
      m_next(start), m_claimed(start), m_capacity(std::max(1, capacity)) {
    for (int i = 0; i < n_workers; ++i) m_workers.emplace_back([this] { worker(); });
}

ExampleStream::~ExampleStream() {
    {
        std::lock_guard lock(m_mutex);
        m_stop = true;
    }
    m_cv.notify_all();
    for (auto &t : m_workers) t.join();
}

Example ExampleStream::build(uint64_t id) const {
    Example ex = make_example(sample_conformer(m_spec, m_seed, id), m_c_x, m_threshold);
    ex.id = id;
    return ex;
}

void ExampleStream::worker() {
    std::unique_lock lock(m_mutex);
    while (true) {
        m_cv.wait(lock, [&] { return m_stop || m_claimed < m_next + m_capacity; });
        if (m_stop) return;
        const uint64_t id = m_claimed++;
        lock.unlock();
        Example ex;
        std::string failure;
        try {
            ex = build(id);
        } catch (const std::exception &e) {
            failure = e.what();
        }
        lock.lock();
        if (!failure.empty()) {
            ex.id = id;
            ex.error = failure;
        }
        m_ready.emplace(id, std::move(ex));
        m_cv.notify_all();
    }
}

Example ExampleStream::next() {
    const uint64_t id = m_next;
    if (m_workers.empty()) {
        ++m_next;
        return build(id);
    }
    std::unique_lock lock(m_mutex);
    m_cv.wait(lock, [&] { return m_ready.count(id) > 0; });
    Example ex = std::move(m_ready.at(id));
    m_ready.erase(id);
    ++m_next;
    m_cv.notify_all();
    lock.unlock();
    if (!ex.error.empty() && !ex.degenerate) throw std::runtime_error(ex.error);
    return ex;
}

} // namespace qpt
