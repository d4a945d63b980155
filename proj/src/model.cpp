#include <qpt/model.h>

#include <cmath>
#include <fmt/core.h>
#include <numbers>
#include <random>

namespace qpt {

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view s) {
    if (s == "f32" || s == "float32") return Precision::f32;
    if (s == "f64" || s == "float64") return Precision::f64;
    throw std::invalid_argument(fmt::format("unknown precision '{}' (expected f32 or f64)", s));
}

void ModelConfig::validate() const {
    if (d_model <= 0 || n_layers < 0 || n_heads <= 0 || vocab_size <= 0 || max_seq_len <= 0)
        throw std::invalid_argument("model config: sizes must be positive");
    if (d_model % n_heads != 0)
        throw std::invalid_argument(
            fmt::format("model config: d_model {} not divisible by n_heads {}", d_model, n_heads));
    if (n_biased_heads < 0 || n_biased_heads > n_heads)
        throw std::invalid_argument(fmt::format(
            "model config: n_biased_heads {} exceeds n_heads {}", n_biased_heads, n_heads));
    if (vocab_size < token_vocab_size())
        throw std::invalid_argument(fmt::format("model config: vocab_size {} below the {} AO tokens",
                                                vocab_size, token_vocab_size()));
}

size_t parameter_count(const ModelConfig &cfg) {
    const size_t d = cfg.d_model;
    const size_t per_layer = 2 * d                  // ln1
                             + d * 3 * d + 3 * d    // qkv
                             + d * d + d            // output projection
                             + cfg.n_heads          // bias gains
                             + 2 * d                // ln2
                             + d * 4 * d + 4 * d    // mlp in
                             + 4 * d * d + d;       // mlp out
    return cfg.vocab_size * d + 3 * d + cfg.n_layers * per_layer + 2 * d + d * cfg.d_head();
}

namespace {

// tensor order within one encoder block
enum LayerSlot {
    kLn1G, kLn1B, kWqkv, kBqkv, kWo, kBo, kGain, kLn2G, kLn2B, kWfc, kBfc, kWproj, kBproj,
    kLayerSlots
};

constexpr int kTokEmb = 0;
constexpr int kPosProj = 1;
constexpr int kFirstLayer = 2;

int slot(int layer, LayerSlot s) { return kFirstLayer + layer * kLayerSlots + s; }
int ln_f_g(const ModelConfig &cfg) { return kFirstLayer + cfg.n_layers * kLayerSlots; }
int ln_f_b(const ModelConfig &cfg) { return ln_f_g(cfg) + 1; }
int w_sym(const ModelConfig &cfg) { return ln_f_g(cfg) + 2; }

constexpr double kLnEps = 1e-5;

template <typename T>
void layer_norm(const MatT<T> &x, const Tensor<T> &g, const Tensor<T> &b, MatT<T> &xhat,
                std::vector<T> &rstd, MatT<T> &y) {
    const auto L = x.rows(), d = x.cols();
    xhat.resize(L, d);
    y.resize(L, d);
    rstd.resize(L);
    for (Eigen::Index i = 0; i < L; ++i) {
        const T mean = x.row(i).mean();
        const T var = (x.row(i).array() - mean).square().mean();
        rstd[i] = T(1) / std::sqrt(var + T(kLnEps));
        xhat.row(i) = (x.row(i).array() - mean) * rstd[i];
    }
    y = (xhat.array().rowwise() * g.mat().row(0).array()).rowwise() + b.mat().row(0).array();
}

template <typename T>
MatT<T> layer_norm_backward(const MatT<T> &dy, const MatT<T> &xhat, const std::vector<T> &rstd,
                            const Tensor<T> &g, Tensor<T> &dg, Tensor<T> &db) {
    dg.mat().row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
    db.mat().row(0) += dy.colwise().sum();
    const MatT<T> dxhat = (dy.array().rowwise() * g.mat().row(0).array()).matrix();
    MatT<T> dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        const T m1 = dxhat.row(i).mean();
        const T m2 = (dxhat.row(i).array() * xhat.row(i).array()).mean();
        dx.row(i) = rstd[i] * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2).matrix();
    }
    return dx;
}

template <typename T> T gelu(T u) {
    const T k = T(std::sqrt(2.0 / std::numbers::pi));
    return T(0.5) * u * (T(1) + std::tanh(k * (u + T(0.044715) * u * u * u)));
}

template <typename T> T gelu_grad(T u) {
    const T k = T(std::sqrt(2.0 / std::numbers::pi));
    const T t = std::tanh(k * (u + T(0.044715) * u * u * u));
    return T(0.5) * (T(1) + t) + T(0.5) * u * (T(1) - t * t) * k * (T(1) + T(3 * 0.044715) * u * u);
}

template <typename T> void softmax_rows(MatT<T> &s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const T m = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - m).exp().matrix();
        s.row(i) /= s.row(i).sum();
    }
}

template <typename T> Tensor<T> make_tensor(std::string name, int rows, int cols, bool decay) {
    return {std::move(name), rows, cols, decay, std::vector<T>(size_t(rows) * cols, T(0))};
}

} // namespace

template <typename T> size_t ParamSet<T>::size() const {
    size_t n = 0;
    for (const auto &t : tensors) n += t.data.size();
    return n;
}

template <typename T> ParamSet<T> ParamSet<T>::zeros_like() const {
    ParamSet out = *this;
    for (auto &t : out.tensors) std::fill(t.data.begin(), t.data.end(), T(0));
    return out;
}

template <typename T> bool ParamSet<T>::all_finite() const {
    for (const auto &t : tensors)
        for (T v : t.data)
            if (!std::isfinite(v)) return false;
    return true;
}

template <typename T> const Tensor<T> &ParamSet<T>::find(std::string_view name) const {
    for (const auto &t : tensors)
        if (t.name == name) return t;
    throw std::out_of_range(fmt::format("no parameter named '{}'", name));
}

template <typename T> Tensor<T> &ParamSet<T>::find(std::string_view name) {
    return const_cast<Tensor<T> &>(std::as_const(*this).find(name));
}

Mat unit_max_abs(const Mat &m) {
    const double s = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
    return s > 0.0 ? Mat(m / s) : Mat(m);
}

BiasSet build_bias_set(const IntegralSet &ints, const InitialGuess &guess,
                       const TokenSequence &tokens, double c_x) {
    const int n = ints.n_ao();
    if (static_cast<int>(tokens.size()) != n)
        throw std::invalid_argument("build_bias_set: token count differs from AO count");
    const Mat L = cholesky(ints.S);
    const auto jk = coulomb_exchange(guess.rho0, ints.eri);
    Mat pos(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) pos(i, j) = tokens.r_hat[i].dot(tokens.r_hat[j]);

    BiasSet b;
    b.channels = {unit_max_abs(ints.H_core),
                  unit_max_abs(whiten(ints.H_core, L)),
                  unit_max_abs(guess.rho0),
                  unit_max_abs(symmetrize(jk.J - 0.5 * c_x * jk.K)),
                  unit_max_abs(guess.H_init),
                  unit_max_abs(ints.S),
                  unit_max_abs(pos)};
    return b;
}

template <typename T> ParamSet<T> init_params(const ModelConfig &cfg) {
    cfg.validate();
    const int d = cfg.d_model;
    ParamSet<T> p;
    p.tensors.push_back(make_tensor<T>("tok_emb", cfg.vocab_size, d, false));
    p.tensors.push_back(make_tensor<T>("pos_proj", 3, d, true));
    for (int l = 0; l < cfg.n_layers; ++l) {
        const auto pre = fmt::format("blocks.{}.", l);
        p.tensors.push_back(make_tensor<T>(pre + "ln1.g", 1, d, false));
        p.tensors.push_back(make_tensor<T>(pre + "ln1.b", 1, d, false));
        p.tensors.push_back(make_tensor<T>(pre + "attn.w_qkv", d, 3 * d, true));
        p.tensors.push_back(make_tensor<T>(pre + "attn.b_qkv", 1, 3 * d, false));
        p.tensors.push_back(make_tensor<T>(pre + "attn.w_o", d, d, true));
        p.tensors.push_back(make_tensor<T>(pre + "attn.b_o", 1, d, false));
        p.tensors.push_back(make_tensor<T>(pre + "attn.bias_gain", 1, cfg.n_heads, false));
        p.tensors.push_back(make_tensor<T>(pre + "ln2.g", 1, d, false));
        p.tensors.push_back(make_tensor<T>(pre + "ln2.b", 1, d, false));
        p.tensors.push_back(make_tensor<T>(pre + "mlp.w_fc", d, 4 * d, true));
        p.tensors.push_back(make_tensor<T>(pre + "mlp.b_fc", 1, 4 * d, false));
        p.tensors.push_back(make_tensor<T>(pre + "mlp.w_proj", 4 * d, d, true));
        p.tensors.push_back(make_tensor<T>(pre + "mlp.b_proj", 1, d, false));
    }
    p.tensors.push_back(make_tensor<T>("ln_f.g", 1, d, false));
    p.tensors.push_back(make_tensor<T>("ln_f.b", 1, d, false));
    p.tensors.push_back(make_tensor<T>("head.w_sym", d, cfg.d_head(), true));

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double resid_scale = 0.02 / std::sqrt(2.0 * std::max(1, cfg.n_layers));
    for (auto &t : p.tensors) {
        const auto &n = t.name;
        auto ends_with = [&](std::string_view suffix) {
            return n.size() >= suffix.size() && n.compare(n.size() - suffix.size(), suffix.size(),
                                                          suffix) == 0;
        };
        if (ends_with(".g") || ends_with("bias_gain")) {
            std::fill(t.data.begin(), t.data.end(), T(1));
        } else if (ends_with("attn.w_o") || ends_with("mlp.w_proj")) {
            for (auto &v : t.data) v = T(resid_scale * normal(rng));
        } else if (n == "tok_emb" || t.decay) {
            for (auto &v : t.data) v = T(0.02 * normal(rng));
        }
    }
    return p;
}

template <typename T> void zero_final_head(ParamSet<T> &params) {
    auto &t = params.find("head.w_sym");
    std::fill(t.data.begin(), t.data.end(), T(0));
}

template <typename T>
MatT<T> forward(const ModelConfig &cfg, const ParamSet<T> &params, const TokenSequence &tokens,
                const BiasSet &bias, ForwardCache<T> *cache) {
    const int L = static_cast<int>(tokens.size());
    if (L == 0 || L > cfg.max_seq_len)
        throw std::length_error(
            fmt::format("sequence length {} outside [1, {}]", L, cfg.max_seq_len));
    const int d = cfg.d_model, dh = cfg.d_head();
    const auto &P = params.tensors;
    if (static_cast<int>(P.size()) != w_sym(cfg) + 1)
        throw std::invalid_argument("forward: parameter set does not match the model config");

    ForwardCache<T> local;
    auto &c = cache ? *cache : local;
    c.layers.assign(cfg.n_layers, {});
    for (int ch = 0; ch < kBiasChannels; ++ch) {
        if (bias.channels[ch].rows() != L || bias.channels[ch].cols() != L)
            throw std::invalid_argument("forward: bias matrix shape does not match sequence");
        c.bias[ch] = bias.channels[ch].cast<T>();
    }
    c.z_hat = tokens.z_hat;
    c.r_hat.resize(L, 3);
    for (int i = 0; i < L; ++i) c.r_hat.row(i) = tokens.r_hat[i].cast<T>().transpose();

    MatT<T> x(L, d);
    const auto emb = P[kTokEmb].mat();
    for (int i = 0; i < L; ++i) {
        const int z = tokens.z_hat[i];
        if (z < 0 || z >= cfg.vocab_size)
            throw std::out_of_range(fmt::format("token id {} outside vocabulary", z));
        x.row(i) = emb.row(z);
    }
    x.noalias() += c.r_hat * P[kPosProj].mat();

    const T scale = T(1) / std::sqrt(T(dh));
    for (int l = 0; l < cfg.n_layers; ++l) {
        auto &lc = c.layers[l];
        lc.x_in = x;
        layer_norm(x, P[slot(l, kLn1G)], P[slot(l, kLn1B)], lc.xhat1, lc.rstd1, lc.h1);
        lc.qkv = lc.h1 * P[slot(l, kWqkv)].mat();
        lc.qkv.rowwise() += P[slot(l, kBqkv)].mat().row(0);
        lc.ocat.resize(L, d);
        lc.probs.resize(cfg.n_heads);
        const auto gain = P[slot(l, kGain)].mat();
        for (int h = 0; h < cfg.n_heads; ++h) {
            const auto Q = lc.qkv.middleCols(h * dh, dh);
            const auto K = lc.qkv.middleCols(d + h * dh, dh);
            const auto V = lc.qkv.middleCols(2 * d + h * dh, dh);
            MatT<T> s = (Q * K.transpose()) * scale;
            if (h < cfg.n_biased_heads) s += gain(0, h) * c.bias[h % kBiasChannels];
            softmax_rows(s);
            lc.ocat.middleCols(h * dh, dh) = s * V;
            lc.probs[h] = std::move(s);
        }
        x.noalias() += lc.ocat * P[slot(l, kWo)].mat();
        x.rowwise() += P[slot(l, kBo)].mat().row(0);
        lc.x_mid = x;

        layer_norm(x, P[slot(l, kLn2G)], P[slot(l, kLn2B)], lc.xhat2, lc.rstd2, lc.h2);
        lc.u = lc.h2 * P[slot(l, kWfc)].mat();
        lc.u.rowwise() += P[slot(l, kBfc)].mat().row(0);
        lc.g = lc.u.unaryExpr([](T v) { return gelu(v); });
        x.noalias() += lc.g * P[slot(l, kWproj)].mat();
        x.rowwise() += P[slot(l, kBproj)].mat().row(0);
        if (!x.allFinite()) throw NonFiniteError(fmt::format("non-finite activation in layer {}", l));
    }

    c.x_last = x;
    layer_norm(x, P[ln_f_g(cfg)], P[ln_f_b(cfg)], c.xhatf, c.rstdf, c.hf);
    c.q = c.hf * P[w_sym(cfg)].mat();
    MatT<T> A(L, L);
    for (int i = 0; i < L; ++i)
        for (int j = i; j < L; ++j) A(i, j) = A(j, i) = c.q.row(i).dot(c.q.row(j)) * scale;
    if (!A.allFinite()) throw NonFiniteError("non-finite activation in output head");
    c.A = A;
    return A;
}

template <typename T>
ParamSet<T> backward(const ModelConfig &cfg, const ParamSet<T> &params,
                     const ForwardCache<T> &c, const MatT<T> &dA) {
    const int L = static_cast<int>(c.A.rows());
    if (dA.rows() != L || dA.cols() != L) throw std::invalid_argument("backward: dA shape");
    const int d = cfg.d_model, dh = cfg.d_head();
    const auto &P = params.tensors;
    ParamSet<T> grads = params.zeros_like();
    auto &G = grads.tensors;
    const T scale = T(1) / std::sqrt(T(dh));

    const MatT<T> dq = (dA + dA.transpose()) * c.q * scale;
    G[w_sym(cfg)].mat() += c.hf.transpose() * dq;
    MatT<T> dx = layer_norm_backward<T>(dq * P[w_sym(cfg)].mat().transpose(), c.xhatf, c.rstdf,
                                        P[ln_f_g(cfg)], G[ln_f_g(cfg)], G[ln_f_b(cfg)]);

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const auto &lc = c.layers[l];
        // MLP
        G[slot(l, kWproj)].mat() += lc.g.transpose() * dx;
        G[slot(l, kBproj)].mat().row(0) += dx.colwise().sum();
        MatT<T> du = dx * P[slot(l, kWproj)].mat().transpose();
        du = du.cwiseProduct(lc.u.unaryExpr([](T v) { return gelu_grad(v); }));
        G[slot(l, kWfc)].mat() += lc.h2.transpose() * du;
        G[slot(l, kBfc)].mat().row(0) += du.colwise().sum();
        dx += layer_norm_backward<T>(du * P[slot(l, kWfc)].mat().transpose(), lc.xhat2, lc.rstd2,
                                     P[slot(l, kLn2G)], G[slot(l, kLn2G)], G[slot(l, kLn2B)]);

        // attention
        G[slot(l, kWo)].mat() += lc.ocat.transpose() * dx;
        G[slot(l, kBo)].mat().row(0) += dx.colwise().sum();
        const MatT<T> dO = dx * P[slot(l, kWo)].mat().transpose();
        MatT<T> dqkv(L, 3 * d);
        auto dgain = G[slot(l, kGain)].mat();
        for (int h = 0; h < cfg.n_heads; ++h) {
            const auto Q = lc.qkv.middleCols(h * dh, dh);
            const auto K = lc.qkv.middleCols(d + h * dh, dh);
            const auto V = lc.qkv.middleCols(2 * d + h * dh, dh);
            const auto &prob = lc.probs[h];
            const auto dOh = dO.middleCols(h * dh, dh);
            const MatT<T> dP = dOh * V.transpose();
            MatT<T> dS = prob.cwiseProduct(dP);
            const auto rowdot = dS.rowwise().sum().eval();
            dS -= prob.cwiseProduct(rowdot.replicate(1, L));
            if (h < cfg.n_biased_heads) dgain(0, h) += dS.cwiseProduct(c.bias[h % kBiasChannels]).sum();
            dqkv.middleCols(h * dh, dh) = dS * K * scale;
            dqkv.middleCols(d + h * dh, dh) = dS.transpose() * Q * scale;
            dqkv.middleCols(2 * d + h * dh, dh) = prob.transpose() * dOh;
        }
        G[slot(l, kWqkv)].mat() += lc.h1.transpose() * dqkv;
        G[slot(l, kBqkv)].mat().row(0) += dqkv.colwise().sum();
        dx += layer_norm_backward<T>(dqkv * P[slot(l, kWqkv)].mat().transpose(), lc.xhat1,
                                     lc.rstd1, P[slot(l, kLn1G)], G[slot(l, kLn1G)],
                                     G[slot(l, kLn1B)]);
    }

    auto demb = G[kTokEmb].mat();
    for (int i = 0; i < L; ++i) demb.row(c.z_hat[i]) += dx.row(i);
    G[kPosProj].mat() += c.r_hat.transpose() * dx;

    if (!grads.all_finite()) throw NonFiniteError("non-finite parameter gradient");
    return grads;
}

template <typename T>
ParamSet<T> backward(const ModelConfig &cfg, const ParamSet<T> &params,
                     const TokenSequence &tokens, const BiasSet &bias, const Mat &dA) {
    ForwardCache<T> cache;
    forward(cfg, params, tokens, bias, &cache);
    return backward(cfg, params, cache, MatT<T>(dA.cast<T>()));
}

#define QPT_INSTANTIATE(T)                                                                        \
    template struct ParamSet<T>;                                                                  \
    template ParamSet<T> init_params<T>(const ModelConfig &);                                     \
    template void zero_final_head<T>(ParamSet<T> &);                                              \
    template MatT<T> forward<T>(const ModelConfig &, const ParamSet<T> &, const TokenSequence &,  \
                                const BiasSet &, ForwardCache<T> *);                              \
    template ParamSet<T> backward<T>(const ModelConfig &, const ParamSet<T> &,                    \
                                     const ForwardCache<T> &, const MatT<T> &);                   \
    template ParamSet<T> backward<T>(const ModelConfig &, const ParamSet<T> &,                    \
                                     const TokenSequence &, const BiasSet &, const Mat &);

QPT_INSTANTIATE(float)
QPT_INSTANTIATE(double)

} // namespace qpt
