#pragma once
#include <qpt/conformer.h>
#include <qpt/model.h>

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

namespace qpt {

/// Everything the trainer needs for one molecule: tokens, fixed integrals,
/// initial guess and attention biases.
struct Example {
    uint64_t id{0};
    Conformer conformer;
    AOBasis basis;
    TokenSequence tokens;
    IntegralSet ints;
    InitialGuess guess;
    BiasSet bias;
    int n_occ{0};
    bool degenerate{false}; // core guess hit a vanishing HOMO-LUMO gap
    std::string error;
};

/// Builds an example from a canonicalized conformer.
Example make_example(Conformer conf, double c_x = 1.0,
                     double eri_threshold = kDefaultEriThreshold);

/// H = H_init + A, with A from the model in its own precision.
template <typename T>
Mat predict_hamiltonian(const ModelConfig &cfg, const ParamSet<T> &params, const Example &ex,
                        ForwardCache<T> *cache = nullptr);

/// Worker count from QPT_THREADS, defaulting to the hardware concurrency
/// (at most 8). 0 means examples are built on the calling thread.
int producer_threads();

/// Ordered stream of examples id = start, start+1, ... built ahead by a
/// bounded pool of producer threads. Output does not depend on thread count.
class ExampleStream {
  public:
    ExampleStream(ConformerSpec spec, uint64_t seed, uint64_t start, double c_x,
                  double eri_threshold, int n_workers, int capacity);
    ~ExampleStream();
    ExampleStream(const ExampleStream &) = delete;
    ExampleStream &operator=(const ExampleStream &) = delete;

    uint64_t next_id() const { return m_next; }
    Example next();

  private:
    Example build(uint64_t id) const;
    void worker();

    ConformerSpec m_spec;
    uint64_t m_seed;
    double m_c_x, m_threshold;
    uint64_t m_next;     // next id handed to the consumer
    uint64_t m_claimed;  // next id a worker will build
    int m_capacity;
    bool m_stop{false};
    std::map<uint64_t, Example> m_ready;
    std::mutex m_mutex;
    std::condition_variable m_cv;
    std::vector<std::thread> m_workers;
};

} // namespace qpt
