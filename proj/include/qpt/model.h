#pragma once
#include <qpt/basis.h>
#include <qpt/energy.h>

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpt {

enum class Precision : uint8_t { f32 = 0, f64 = 1 };

std::string to_string(Precision p);
Precision parse_precision(std::string_view s);

struct ModelConfig {
    int d_model{64};
    int n_layers{4};
    int n_heads{4};
    int n_biased_heads{3};
    int vocab_size{27};
    int max_seq_len{64};
    Precision precision{Precision::f32};
    uint64_t seed{0};

    int d_head() const { return d_model / n_heads; }
    void validate() const;
    bool operator==(const ModelConfig &) const = default;
};

/// Closed-form number of scalar parameters for `cfg`.
size_t parameter_count(const ModelConfig &cfg);

class NonFiniteError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

template <typename T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T> struct Tensor {
    std::string name;
    int rows{0}, cols{0};
    bool decay{false}; // subject to weight decay
    std::vector<T> data;

    Eigen::Map<MatT<T>> mat() { return {data.data(), rows, cols}; }
    Eigen::Map<const MatT<T>> mat() const { return {data.data(), rows, cols}; }
};

/// Named parameter tensors in a fixed order; also used for gradients and
/// optimizer moments.
template <typename T> struct ParamSet {
    std::vector<Tensor<T>> tensors;

    size_t size() const;
    ParamSet zeros_like() const;
    bool all_finite() const;
    const Tensor<T> &find(std::string_view name) const;
    Tensor<T> &find(std::string_view name);
};

template <typename To, typename From> ParamSet<To> cast_params(const ParamSet<From> &p) {
    ParamSet<To> out;
    for (const auto &t : p.tensors) {
        Tensor<To> c{t.name, t.rows, t.cols, t.decay, {}};
        c.data.assign(t.data.begin(), t.data.end());
        out.tensors.push_back(std::move(c));
    }
    return out;
}

inline constexpr int kBiasChannels = 7;

/// Attention-bias matrices, each scaled to unit max-abs: H_core, whitened
/// core, rho0, J(rho0) - K(rho0)/2, H(rho0), S, and positional dot products.
struct BiasSet {
    std::array<Mat, kBiasChannels> channels;
};

/// Normalizes to unit max-abs; the zero matrix stays zero.
Mat unit_max_abs(const Mat &m);

BiasSet build_bias_set(const IntegralSet &ints, const InitialGuess &guess,
                       const TokenSequence &tokens, double c_x = 1.0);

template <typename T> ParamSet<T> init_params(const ModelConfig &cfg);

/// Zeroes the symmetric output projection, so the model predicts A = 0.
template <typename T> void zero_final_head(ParamSet<T> &params);

/// Activations kept for the backward pass.
template <typename T> struct ForwardCache {
    struct Layer {
        MatT<T> x_in, xhat1, h1, qkv, ocat, x_mid, xhat2, h2, u, g;
        std::vector<T> rstd1, rstd2;
        std::vector<MatT<T>> probs; // per head
    };
    std::vector<Layer> layers;
    std::array<MatT<T>, kBiasChannels> bias;
    std::vector<int> z_hat;
    MatT<T> r_hat;
    MatT<T> x_last, xhatf, hf, q;
    std::vector<T> rstdf;
    MatT<T> A;
};

/// Runs the encoder and returns the symmetric pre-softmax output head A.
template <typename T>
MatT<T> forward(const ModelConfig &cfg, const ParamSet<T> &params, const TokenSequence &tokens,
                const BiasSet &bias, ForwardCache<T> *cache = nullptr);

/// Gradients of sum(dA .* A) with respect to every parameter, from a cache
/// produced by forward() with the same parameters.
template <typename T>
ParamSet<T> backward(const ModelConfig &cfg, const ParamSet<T> &params,
                     const ForwardCache<T> &cache, const MatT<T> &dA);

/// Convenience: recomputes the forward pass, then backpropagates dA (float64,
/// cast to the model precision).
template <typename T>
ParamSet<T> backward(const ModelConfig &cfg, const ParamSet<T> &params,
                     const TokenSequence &tokens, const BiasSet &bias, const Mat &dA);

} // namespace qpt
