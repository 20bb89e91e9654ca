#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "latlab/engine.hpp"
#include "latlab/rng.hpp"

using namespace latlab;
using Catch::Approx;

namespace {

ModelCheckpoint random_model(int d, int layers, int heads, int vocab, int seq, int ff,
                             uint64_t seed) {
    ModelCheckpoint m = ModelCheckpoint::zeros(d, layers, heads, vocab, seq, ff);
    Rng rng(seed);
    const auto fill = [&](Mat<float>& w, double sd) {
        for (float& x : w.a) x = float(rng.normal(0.0, sd));
    };
    fill(m.tok_embed, 0.5);
    fill(m.pos_embed, 0.1);
    fill(m.unembed, 0.5);
    for (BlockWeights& b : m.blocks) {
        fill(b.wq, 0.3); fill(b.wk, 0.3); fill(b.wv, 0.3); fill(b.wo, 0.3);
        fill(b.w_in, 0.3); fill(b.w_out, 0.3);
    }
    return m;
}

// Echo model: one pass-through block, token embeddings = unembedding = identity,
// so the greedy continuation repeats the last token forever.
ModelCheckpoint echo_model(int d = 4, int max_seq = 8) {
    ModelCheckpoint m = ModelCheckpoint::zeros(d, 1, 1, d, max_seq, d);
    for (int i = 0; i < d; ++i) {
        m.tok_embed.at(i, i) = 1.0f;
        m.unembed.at(i, i) = 1.0f;
    }
    return m;
}

// Full forward pass without a KV cache: every position recomputes attention
// over the whole prefix. Independent check on the incremental engine.
std::vector<std::vector<float>> reference_logits(const ModelCheckpoint& m,
                                                 const std::vector<int>& toks) {
    const int n = int(toks.size());
    const int dh = m.d_model / m.n_heads;
    std::vector<std::vector<float>> hs(size_t(n), std::vector<float>(size_t(m.d_model)));
    for (int p = 0; p < n; ++p)
        for (int i = 0; i < m.d_model; ++i)
            hs[size_t(p)][size_t(i)] = m.tok_embed.at(toks[size_t(p)], i) + m.pos_embed.at(p, i);

    for (const BlockWeights& b : m.blocks) {
        std::vector<std::vector<float>> q(static_cast<size_t>(n)), k(static_cast<size_t>(n)), v(static_cast<size_t>(n));
        for (int p = 0; p < n; ++p) {
            std::vector<float> nm(size_t(m.d_model));
            detail::layer_norm(hs[size_t(p)], b.ln1_g, b.ln1_b, nm);
            q[size_t(p)] = matvec(b.wq, std::span<const float>(nm));
            detail::add_bias(q[size_t(p)], b.bq);
            k[size_t(p)] = matvec(b.wk, std::span<const float>(nm));
            detail::add_bias(k[size_t(p)], b.bk);
            v[size_t(p)] = matvec(b.wv, std::span<const float>(nm));
            detail::add_bias(v[size_t(p)], b.bv);
        }
        for (int p = 0; p < n; ++p) {
            std::vector<float> attn(size_t(m.d_model), 0.0f);
            for (int head = 0; head < m.n_heads; ++head) {
                const int off = head * dh;
                std::vector<double> s(size_t(p) + 1);
                double mx = -1e300;
                for (int t = 0; t <= p; ++t) {
                    double acc = 0.0;
                    for (int i = 0; i < dh; ++i)
                        acc += double(q[size_t(p)][size_t(off + i)]) * double(k[size_t(t)][size_t(off + i)]);
                    s[size_t(t)] = acc / std::sqrt(double(dh));
                    mx = std::max(mx, s[size_t(t)]);
                }
                double denom = 0.0;
                for (int t = 0; t <= p; ++t) {
                    s[size_t(t)] = std::exp(s[size_t(t)] - mx);
                    denom += s[size_t(t)];
                }
                for (int i = 0; i < dh; ++i) {
                    double acc = 0.0;
                    for (int t = 0; t <= p; ++t) acc += s[size_t(t)] * double(v[size_t(t)][size_t(off + i)]);
                    attn[size_t(off + i)] = float(acc / denom);
                }
            }
            const std::vector<float> proj = matvec(b.wo, std::span<const float>(attn));
            for (int i = 0; i < m.d_model; ++i)
                hs[size_t(p)][size_t(i)] += proj[size_t(i)] + b.bo[size_t(i)];

            std::vector<float> nm(size_t(m.d_model));
            detail::layer_norm(hs[size_t(p)], b.ln2_g, b.ln2_b, nm);
            std::vector<float> ff = matvec(b.w_in, std::span<const float>(nm));
            for (int i = 0; i < m.d_ff; ++i) ff[size_t(i)] = detail::gelu(ff[size_t(i)] + b.b_in[size_t(i)]);
            const std::vector<float> mlp = matvec(b.w_out, std::span<const float>(ff));
            for (int i = 0; i < m.d_model; ++i)
                hs[size_t(p)][size_t(i)] += mlp[size_t(i)] + b.b_out[size_t(i)];
        }
    }

    std::vector<std::vector<float>> out(static_cast<size_t>(n));
    for (int p = 0; p < n; ++p) {
        std::vector<float> nm(size_t(m.d_model));
        detail::layer_norm(hs[size_t(p)], m.lnf_g, m.lnf_b, nm);
        out[size_t(p)] = matvec(m.unembed, std::span<const float>(nm));
    }
    return out;
}

}  // namespace

TEST_CASE("layer_norm matches a direct computation") {
    Rng rng(4);
    std::vector<float> x(7), g(7), b(7), out(7);
    for (int i = 0; i < 7; ++i) {
        x[size_t(i)] = float(rng.normal(0.0, 2.0));
        g[size_t(i)] = float(rng.normal(1.0, 0.2));
        b[size_t(i)] = float(rng.normal(0.0, 0.2));
    }
    detail::layer_norm(x, g, b, out);
    double mean = 0.0;
    for (float v : x) mean += v;
    mean /= 7.0;
    double var = 0.0;
    for (float v : x) var += (v - mean) * (v - mean);
    var /= 7.0;
    for (int i = 0; i < 7; ++i) {
        const double want = (x[size_t(i)] - mean) / std::sqrt(var + 1e-5) * g[size_t(i)] + b[size_t(i)];
        REQUIRE(double(out[size_t(i)]) == Approx(want).margin(1e-6));
    }
}

TEST_CASE("gelu matches its closed form and limits") {
    REQUIRE(detail::gelu(0.0f) == 0.0f);
    const auto ref = [](double x) {
        return 0.5 * x * (1.0 + std::tanh(0.7978845608028654 * (x + 0.044715 * x * x * x)));
    };
    for (const float x : {-3.0f, -1.0f, -0.5f, 0.5f, 1.0f, 2.0f, 3.0f})
        REQUIRE(double(detail::gelu(x)) == Approx(ref(x)).margin(1e-7));
    REQUIRE(double(detail::gelu(10.0f)) == Approx(10.0).margin(1e-4));
    REQUIRE(double(detail::gelu(-10.0f)) == Approx(0.0).margin(1e-4));
}

TEST_CASE("incremental engine matches the no-cache reference") {
    const ModelCheckpoint m = random_model(8, 2, 2, 12, 10, 16, 2024);
    const std::vector<int> toks = {3, 1, 7, 0, 11, 5};
    const auto ref = reference_logits(m, toks);

    Engine eng(m);
    GenerateOptions opt;
    for (size_t p = 0; p < toks.size(); ++p) {
        const std::vector<float> logits = eng.step(toks[p], 0, opt, nullptr);
        REQUIRE(logits.size() == ref[p].size());
        for (size_t i = 0; i < logits.size(); ++i)
            REQUIRE(double(logits[i]) == Approx(double(ref[p][i])).margin(1e-4));
    }
}

TEST_CASE("earlier logits are unaffected by later tokens") {
    const ModelCheckpoint m = random_model(8, 2, 2, 12, 10, 16, 7);
    GenerateOptions opt;
    Engine full(m);
    const std::vector<float> l0_full = full.step(4, 0, opt, nullptr);
    full.step(9, 0, opt, nullptr);
    full.step(2, 0, opt, nullptr);

    Engine lone(m);
    const std::vector<float> l0_lone = lone.step(4, 0, opt, nullptr);
    REQUIRE(l0_full == l0_lone);
}

TEST_CASE("greedy generation echoes the last token") {
    const ModelCheckpoint m = echo_model();
    GenerateOptions opt;
    opt.config.max_new_tokens = 3;
    const Generation g1 = generate(m, std::vector<int>{2}, opt);
    REQUIRE(g1.generated == std::vector<int>{2, 2, 2});
    const Generation g2 = generate(m, std::vector<int>{1, 3}, opt);
    REQUIRE(g2.generated == std::vector<int>{3, 3, 3});
}

TEST_CASE("greedy argmax breaks ties toward the lowest index") {
    const ModelCheckpoint m = ModelCheckpoint::zeros(4, 1, 1, 6, 8, 4);
    GenerateOptions opt;
    opt.config.max_new_tokens = 2;
    const Generation g = generate(m, std::vector<int>{5}, opt);
    REQUIRE(g.generated == std::vector<int>{0, 0});
    const std::vector<float> v = {1.0f, 3.0f, 3.0f, 0.0f};
    REQUIRE(detail::argmax_lowest(v) == 1);
}

TEST_CASE("generation respects max_seq and stop tokens") {
    const ModelCheckpoint m = echo_model(4, 6);
    GenerateOptions opt;
    opt.config.max_new_tokens = 100;
    const Generation g = generate(m, std::vector<int>{1, 2}, opt);
    REQUIRE(int(g.generated.size()) == 5);  // positions 2..6 hold steps 1..5

    opt.config.stop_token = 3;
    const Generation s = generate(m, std::vector<int>{1, 3}, opt);
    REQUIRE(s.generated == std::vector<int>{3});  // terminator included

    REQUIRE_THROWS_AS(generate(m, std::vector<int>{1, 2, 3, 0, 1, 2, 3}, opt), DataError);
    REQUIRE_THROWS_AS(generate(m, std::vector<int>{}, opt), DataError);
    REQUIRE_THROWS_AS(generate(m, std::vector<int>{99}, opt), DataError);
}

TEST_CASE("hooks fire inside the window and edits reach the logits") {
    const ModelCheckpoint m = echo_model();
    GenerateOptions opt;
    opt.config.max_new_tokens = 4;
    opt.capture = true;

    std::vector<int> seen_steps;
    opt.hook = [&](std::span<float> h, int step) {
        seen_steps.push_back(step);
        h[1] += 50.0f;  // force the echo onto token 1
    };
    opt.hook_window = {2, 3};

    const Generation g = generate(m, std::vector<int>{2}, opt);
    REQUIRE(seen_steps == std::vector<int>{2, 3});
    // step 1 echoes 2; steps 2 and 3 are steered to 1; step 4 echoes 1
    REQUIRE(g.generated == std::vector<int>{2, 1, 1, 1});

    // capture is post-hook
    REQUIRE(g.site_stream.size() == 4);
    REQUIRE(g.site_stream[1][1] > 40.0f);
    REQUIRE(g.site_stream[0][1] < 1.0f);
}

TEST_CASE("temperature sampling is deterministic in the seed") {
    const ModelCheckpoint m = random_model(8, 1, 2, 12, 16, 8, 31);
    GenerateOptions opt;
    opt.config.max_new_tokens = 8;
    opt.config.sampling = Sampling::temperature;
    opt.config.temperature = 1.0;
    opt.config.seed = 9;
    const Generation a = generate(m, std::vector<int>{1, 2}, opt);
    const Generation b = generate(m, std::vector<int>{1, 2}, opt);
    REQUIRE(a.generated == b.generated);
    opt.config.seed = 10;
    bool c = false;
    for (int s = 0; s < 8 && !c; ++s) {
        opt.config.seed = uint64_t(s + 100);
        c = generate(m, std::vector<int>{1, 2}, opt).generated != a.generated;
    }
    REQUIRE(c);

    opt.config.temperature = 0.0;
    REQUIRE_THROWS_AS(generate(m, std::vector<int>{1}, opt), DataError);
}
