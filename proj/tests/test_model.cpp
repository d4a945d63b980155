#include "checks.h"

#include <doctest.h>

#include <qpt/model.h>

using namespace qpt;

TEST_CASE("model config validation") {
    ModelConfig c;
    CHECK_NOTHROW(c.validate());
    c.n_heads = 5;
    CHECK_THROWS(c.validate());
    c = {};
    c.n_biased_heads = 5;
    CHECK_THROWS(c.validate());
    c = {};
    c.vocab_size = 10;
    CHECK_THROWS(c.validate());
    CHECK(parse_precision("f64") == Precision::f64);
    CHECK_THROWS(parse_precision("bf16"));
}

TEST_CASE("parameter count matches the tensors") {
    for (auto [d, l, h] : {std::tuple{16, 2, 4}, {64, 4, 4}, {32, 1, 2}}) {
        ModelConfig c;
        c.d_model = d;
        c.n_layers = l;
        c.n_heads = h;
        c.n_biased_heads = std::min(3, h);
        CHECK(init_params<float>(c).size() == parameter_count(c));
    }
    ModelConfig tiny;
    const size_t d = 64, dh = 16, per_layer = 12 * d * d + 13 * d + 4;
    CHECK(parameter_count(tiny) == 27 * d + 3 * d + 4 * per_layer + 2 * d + d * dh);
}

TEST_CASE("initialization is seeded") {
    const auto cfg = checks::small_model(Precision::f32);
    const auto a = init_params<float>(cfg), b = init_params<float>(cfg);
    auto other = cfg;
    other.seed = 4;
    const auto c = init_params<float>(other);
    bool same = true, differs = false;
    for (size_t t = 0; t < a.tensors.size(); ++t) {
        same = same && a.tensors[t].data == b.tensors[t].data;
        differs = differs || a.tensors[t].data != c.tensors[t].data;
    }
    CHECK(same);
    CHECK(differs);
    CHECK(a.find("ln_f.g").data == std::vector<float>(16, 1.0f));
    CHECK(a.find("blocks.0.attn.b_qkv").data == std::vector<float>(48, 0.0f));
    CHECK(a.find("blocks.1.attn.w_qkv").decay);
    CHECK_FALSE(a.find("blocks.1.ln1.g").decay);
    CHECK_THROWS(a.find("nope"));
}

TEST_CASE("unit max-abs normalization") {
    Mat m(2, 2);
    m << 1.0, -4.0, -4.0, 2.0;
    CHECK(unit_max_abs(m).cwiseAbs().maxCoeff() == 1.0);
    CHECK(unit_max_abs(Mat::Zero(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bias channels are symmetric with unit max-abs") {
    const auto ex = checks::water_example();
    for (const auto &b : ex.bias.channels) {
        CHECK(b.rows() == 7);
        CHECK((b - b.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(b.cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("output head is exactly symmetric") {
    const auto ex = checks::water_example();
    for (auto p : {Precision::f32, Precision::f64}) {
        const auto cfg = checks::small_model(p);
        if (p == Precision::f32) {
            const auto A = forward(cfg, init_params<float>(cfg), ex.tokens, ex.bias);
            CHECK((A - A.transpose()).cwiseAbs().maxCoeff() == 0.0f);
            CHECK(A.cwiseAbs().maxCoeff() > 0.0f);
        } else {
            const auto A = forward(cfg, init_params<double>(cfg), ex.tokens, ex.bias);
            CHECK((A - A.transpose()).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("zeroed head predicts the initial guess") {
    const auto ex = checks::water_example();
    const auto cfg = checks::small_model(Precision::f32);
    auto params = init_params<float>(cfg);
    zero_final_head(params);
    const Mat H = predict_hamiltonian(cfg, params, ex);
    CHECK((H - ex.guess.H_init).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    const auto ex = checks::water_example();
    const auto cfg = checks::small_model(Precision::f64);
    const auto g = backward(cfg, init_params<double>(cfg), ex.tokens, ex.bias, Mat::Zero(7, 7));
    for (const auto &t : g.tensors)
        for (double v : t.data) CHECK(v == 0.0);
}

TEST_CASE("gains of unbiased heads receive no gradient") {
    const auto ex = checks::water_example();
    const auto cfg = checks::small_model(Precision::f64);
    std::mt19937_64 rng(1);
    const auto g = backward(cfg, init_params<double>(cfg), ex.tokens, ex.bias, checks::random_symmetric(7, rng, 1.0));
    for (int l = 0; l < cfg.n_layers; ++l) {
        const auto &gain = g.find("blocks." + std::to_string(l) + ".attn.bias_gain").data;
        REQUIRE(gain.size() == 4);
        CHECK(gain[3] == 0.0);
        CHECK(gain[0] != 0.0);
    }
}

TEST_CASE("gradient matches finite differences") {
    const auto ex = checks::water_example();
    CHECK(checks::model_fd_error<double>(checks::small_model(Precision::f64), ex, 40, 5) < 1e-6);
    CHECK(checks::model_fd_error<float>(checks::small_model(Precision::f32), ex, 40, 6) < 1e-4);
}

TEST_CASE("output is equivariant under consistent relabeling") {
    const auto a = checks::water_example();
    const std::vector<int> perm{5, 0, 1, 2, 3, 4, 6}; // new position i holds old AO perm[i]
    TokenSequence tok;
    BiasSet bias;
    for (int i : perm) {
        tok.z_hat.push_back(a.tokens.z_hat[i]);
        tok.r_hat.push_back(a.tokens.r_hat[i]);
    }
    for (int c = 0; c < kBiasChannels; ++c) {
        bias.channels[c].resize(7, 7);
        for (int i = 0; i < 7; ++i)
            for (int j = 0; j < 7; ++j) bias.channels[c](i, j) = a.bias.channels[c](perm[i], perm[j]);
    }
    const auto cfg = checks::small_model(Precision::f64);
    const auto params = init_params<double>(cfg);
    const auto Aa = forward(cfg, params, a.tokens, a.bias), Ab = forward(cfg, params, tok, bias);
    double worst = 0.0;
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) worst = std::max(worst, std::abs(Ab(i, j) - Aa(perm[i], perm[j])));
    CHECK(worst < 1e-12);
}

TEST_CASE("swapping the atoms of H2 swaps the output") {
    const auto h2 = canonicalize(builtin_molecule("h2"));
    const auto a = make_example({h2, {0, 0}});
    const auto b = make_example({Molecule({h2.atoms()[1], h2.atoms()[0]}), {0, 0}});
    // Channels that are not swap-symmetric by construction (the whitened core)
    // are passed through the same relabeling as the tokens.
    BiasSet bias = a.bias;
    for (auto &m : bias.channels) m = m.reverse().eval();
    const auto cfg = checks::small_model(Precision::f64);
    const auto params = init_params<double>(cfg);
    const auto Aa = forward(cfg, params, a.tokens, a.bias), Ab = forward(cfg, params, b.tokens, bias);
    CHECK(std::abs(Ab(0, 0) - Aa(1, 1)) < 1e-12);
    CHECK(std::abs(Ab(0, 1) - Aa(1, 0)) < 1e-12);
    CHECK(std::abs(Ab(1, 1) - Aa(0, 0)) < 1e-12);
    for (int c : {0, 2, 3, 4, 5, 6}) CHECK((b.bias.channels[c] - bias.channels[c]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sequence length limit") {
    auto cfg = checks::small_model(Precision::f32);
    cfg.max_seq_len = 4;
    const auto ex = checks::water_example();
    CHECK_THROWS(forward(cfg, init_params<float>(cfg), ex.tokens, ex.bias));
}

TEST_CASE("non-finite parameters are detected") {
    auto p = init_params<float>(checks::small_model(Precision::f32));
    CHECK(p.all_finite());
    p.tensors[2].data[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(p.all_finite());
}
