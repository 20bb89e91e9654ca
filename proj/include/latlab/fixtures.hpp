#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "latlab/checkpoint.hpp"
#include "latlab/dataset.hpp"
#include "latlab/discovery.hpp"
#include "latlab/error.hpp"
#include "latlab/rng.hpp"
#include "latlab/sae.hpp"
#include "latlab/tokenizer.hpp"

namespace latlab {

// Synthetic aggregated-latent corpus with known ground truth: condition b is
// pure noise, condition a adds fixed effects on the planted dimensions.
struct PlantedCorpus {
    std::vector<AggregatedExample> corpus;
    std::vector<int> planted;
    std::string cond_a = "a";
    std::string cond_b = "b";
};

inline PlantedCorpus make_planted_corpus(int m, int n_per_condition,
                                         const std::vector<int>& planted,
                                         const std::vector<double>& effects, double noise_scale,
                                         uint64_t seed) {
    if (m <= 0 || n_per_condition <= 0) throw DataError("make_planted_corpus: degenerate sizes");
    if (planted.empty() || planted.size() != effects.size())
        throw DataError("make_planted_corpus: planted/effect size mismatch");
    for (int k : planted)
        if (k < 0 || k >= m) throw DataError("make_planted_corpus: planted index out of range");
    for (double e : effects)
        if (e == 0.0) throw DataError("make_planted_corpus: effects must be nonzero");
    if (noise_scale < 0.0) throw DataError("make_planted_corpus: negative noise scale");

    PlantedCorpus out;
    out.planted = planted;
    Rng rng(seed);
    char id[16];
    for (int c = 0; c < 2; ++c) {
        const bool is_a = c == 0;
        for (int i = 0; i < n_per_condition; ++i) {
            AggregatedExample ex;
            std::snprintf(id, sizeof id, "ex%05d", i);
            ex.example_id = id;
            ex.condition = is_a ? out.cond_a : out.cond_b;
            ex.z.resize(size_t(m));
            for (int j = 0; j < m; ++j) ex.z[size_t(j)] = rng.normal(0.0, noise_scale);
            if (is_a)
                for (size_t j = 0; j < planted.size(); ++j)
                    ex.z[size_t(planted[j])] += effects[j];
            out.corpus.push_back(std::move(ex));
        }
    }
    return out;
}

// Hand-wired single-layer model for a two-mode addition task. A "mode"
// direction in the residual stream decides between an immediate guess and a
// multi-token worked answer; the paired SAE exposes that direction as feature
// 0, so steering it causally flips the decoding mode.
struct ModeModelFixture {
    ModelCheckpoint model;
    SaeParams<float> sae;
    Vocab vocab;
    int feature = 0;
    // Injected residual magnitude along the mode direction above which the
    // greedy completion flips from the short mode to the long mode.
    double threshold = 3.0;
    int stop_token = -1;
    std::string direct_template = "ask {question} = ?";
    std::string cot_template = "cot {question} = ?";
    json construction;
};

namespace fixture_detail {

// Residual axes of the mode model.
enum Axis {
    V1 = 0,      // operand digit value, circle cos
    V2 = 1,      // operand digit value, circle sin
    SV1 = 2,     // attention-written sum readout, cos
    SV2 = 3,     // attention-written sum readout, sin
    DTAG = 4,    // operand marker (attention key)
    GTAG = 5,    // worked-token marker (sum-head query)
    ITAG = 6,    // instruction marker (attention key at position 0)
    CTAG = 7,    // long-mode instruction content (mode-head value)
    QS = 8,      // question-mark marker (gate query)
    MODE = 9,    // mode direction d*
    ACLS = 10,   // answer-token marker (drives end of sequence)
    T1 = 11,     // worked-chain tags T1..T8 = axes 11..18
    BAL = 19,    // balance axes: make every embedding zero-mean with norm R
    FILL = 20,
    ZDUMP = 21,  // unembedding-only axis that zeroes each row sum
    FREE0 = 22,  // axes 22..31 carry the behaviorally inert SAE features
};

inline void balanced_embed(std::span<float> row, const std::vector<std::pair<int, double>>& vals,
                           double R) {
    double s = 0.0, n2 = 0.0;
    for (const auto& [axis, v] : vals) {
        row[size_t(axis)] = float(v);
        s += v;
        n2 += v * v;
    }
    const double disc = 2.0 * (R * R - n2) - s * s;
    if (disc < 0.0) throw DataError("fixture embedding cannot be balanced");
    const double t = std::sqrt(disc);
    row[size_t(BAL)] = float((-s + t) / 2.0);
    row[size_t(FILL)] = float((-s - t) / 2.0);
}

}  // namespace fixture_detail

inline ModeModelFixture make_mode_model(uint64_t seed = 0) {
    using namespace fixture_detail;
    constexpr int d = 32, n_heads = 2, vocab_size = 33, max_seq = 32, d_ff = 8;
    constexpr double R = 14.0;     // embedding norm; first layer norm becomes a pure scaling
    constexpr double theta = 0.3;  // digit circle angle step
    constexpr double rho = 4.0;    // digit circle radius
    const double kappa = 1.0 / std::sqrt(R * R / d + 1e-5);
    const double qk_digit = 3.0 / (2.0 * kappa);   // worked-token -> operand score 9
    const double qk_gate = std::sqrt(1.5) / kappa; // question-mark -> instruction score 9
    const double vgain = 1.0 / std::sqrt(kappa);   // value/output gains multiply to 1/kappa
    constexpr double tag = 4.0, content = 6.0;
    constexpr double B_mode = 8.0, B_chain = 8.0, B_ans = 8.0, B_readout = 8.0;
    constexpr double B_default = 4.0, B_eos = 10.0;

    ModeModelFixture fx;
    fx.threshold = B_default * content / B_mode;  // 3.0: where the mode logit overtakes the guess

    std::vector<std::string> tokens = {"ask", "cot", "+", "=", "?", "."};
    for (int s = 0; s <= 18; ++s) tokens.push_back(std::to_string(s));
    const std::vector<std::string> think = {"so", "let", "us", "see", "one", "more", "pass", "now"};
    for (const std::string& t : think) tokens.push_back(t);
    fx.vocab = Vocab(tokens);
    fx.stop_token = fx.vocab.id(".");
    const auto answer_id = [&](int s) { return 6 + s; };
    const auto think_id = [&](int i) { return 25 + i; };  // i in [0,8)

    ModelCheckpoint m = ModelCheckpoint::zeros(d, 1, n_heads, vocab_size, max_seq, d_ff);

    balanced_embed(m.tok_embed.row(0), {{ITAG, tag}}, R);                 // ask
    balanced_embed(m.tok_embed.row(1), {{ITAG, tag}, {CTAG, content}}, R);  // cot
    balanced_embed(m.tok_embed.row(2), {}, R);                            // +
    balanced_embed(m.tok_embed.row(3), {}, R);                            // =
    balanced_embed(m.tok_embed.row(4), {{QS, content}}, R);               // ?
    balanced_embed(m.tok_embed.row(5), {}, R);                            // .
    for (int s = 0; s <= 18; ++s) {
        std::vector<std::pair<int, double>> vals = {{ACLS, content}};
        if (s <= 9) {
            vals.push_back({V1, rho * std::cos(theta * s)});
            vals.push_back({V2, rho * std::sin(theta * s)});
            vals.push_back({DTAG, tag});
        }
        balanced_embed(m.tok_embed.row(answer_id(s)), vals, R);
    }
    for (int i = 0; i < 8; ++i)
        balanced_embed(m.tok_embed.row(think_id(i)), {{GTAG, tag}, {T1 + i, content}}, R);

    // Head 0 (q/k/v dims 0..15): worked tokens read the two operands and write
    // the sum circle; the question mark parks on the instruction token so no
    // operand value leaks into the step-1 stream.
    BlockWeights& b = m.blocks[0];
    b.wq.at(0, GTAG) = float(qk_digit);
    b.wk.at(0, DTAG) = float(qk_digit);
    b.wq.at(1, QS) = float(qk_gate);
    b.wk.at(1, ITAG) = float(qk_gate);
    b.wv.at(2, V1) = float(vgain);
    b.wv.at(3, V2) = float(vgain);
    b.wo.at(SV1, 2) = float(vgain);
    b.wo.at(SV2, 3) = float(vgain);
    // Head 1 (dims 16..31): the question mark reads the instruction token and
    // writes the mode direction iff the long-mode content tag is present.
    b.wq.at(16, QS) = float(qk_gate);
    b.wk.at(16, ITAG) = float(qk_gate);
    b.wv.at(17, CTAG) = float(vgain);
    b.wo.at(MODE, 17) = float(vgain);

    // Unembedding; ZDUMP zeroes each row sum so the final layer norm's mean
    // subtraction cannot shift any logit.
    const auto urow = [&](int token, const std::vector<std::pair<int, double>>& vals) {
        double s = 0.0;
        for (const auto& [axis, v] : vals) {
            m.unembed.at(token, axis) = float(v);
            s += v;
        }
        m.unembed.at(token, ZDUMP) = float(-s);
    };
    urow(think_id(0), {{MODE, B_mode}});
    for (int i = 1; i < 8; ++i) urow(think_id(i), {{T1 + i - 1, B_chain}});
    for (int s = 0; s <= 18; ++s) {
        std::vector<std::pair<int, double>> vals = {
            {T1 + 7, B_ans},
            {SV1, B_readout * std::cos(theta * s / 2.0)},
            {SV2, B_readout * std::sin(theta * s / 2.0)},
        };
        if (s == 9) vals.push_back({QS, B_default});
        urow(answer_id(s), vals);
    }
    urow(fx.stop_token, {{ACLS, B_eos}});
    fx.model = std::move(m);

    // Paired SAE: feature 0 is exactly the mode direction; features 1..7 live
    // on residual axes the model never writes or reads, with a small positive
    // bias so they fire (and are ablation-eligible) while steering them cannot
    // change any logit.
    SaeParams<float> sae;
    sae.d = d;
    sae.m = 8;
    sae.variant = SaeVariant::relu_l1;
    sae.lambda = 0.0;
    sae.w_enc = Mat<float>(8, d);
    sae.b_enc.assign(8, 0.1f);
    sae.b_enc[0] = 0.0f;
    sae.w_dec = Mat<float>(d, 8);
    sae.b_dec.assign(d, 0.0f);
    sae.w_enc.at(0, MODE) = 1.0f;
    sae.w_dec.at(MODE, 0) = 1.0f;
    {
        // Random orthonormal directions inside the free subspace (axes 22..31).
        Rng rng(seed);
        constexpr int free_dims = d - FREE0;
        std::vector<std::vector<double>> basis;
        while (int(basis.size()) < 7) {
            std::vector<double> v(free_dims);
            for (double& x : v) x = rng.normal();
            for (const auto& u : basis) {
                double dp = 0.0;
                for (int i = 0; i < free_dims; ++i) dp += v[size_t(i)] * u[size_t(i)];
                for (int i = 0; i < free_dims; ++i) v[size_t(i)] -= dp * u[size_t(i)];
            }
            double norm = 0.0;
            for (double x : v) norm += x * x;
            if (norm < 1e-6) continue;
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
            basis.push_back(std::move(v));
        }
        for (int j = 1; j < 8; ++j)
            for (int i = 0; i < free_dims; ++i) {
                sae.w_enc.at(j, FREE0 + i) = float(basis[size_t(j - 1)][size_t(i)]);
                sae.w_dec.at(FREE0 + i, j) = float(basis[size_t(j - 1)][size_t(i)]);
            }
    }
    fx.sae = std::move(sae);

    fx.construction = json{{"d_model", d},
                           {"embed_norm", R},
                           {"digit_angle", theta},
                           {"digit_radius", rho},
                           {"layer_norm_scale", kappa},
                           {"attention_score_target", 9.0},
                           {"mode_write", content},
                           {"logit_weights",
                            json{{"mode", B_mode},
                                 {"chain", B_chain},
                                 {"answer", B_ans},
                                 {"sum_readout", B_readout},
                                 {"default_guess", B_default},
                                 {"eos", B_eos}}},
                           {"threshold", fx.threshold},
                           {"seed", seed}};
    return fx;
}

// Single-digit addition questions ("3 + 4" -> "7"), operands uniform in 0..9.
inline std::vector<DatasetRecord> make_mode_dataset(int n, uint64_t seed) {
    if (n <= 0) throw DataError("make_mode_dataset: n must be positive");
    Rng rng(seed);
    std::vector<DatasetRecord> out;
    out.reserve(size_t(n));
    char id[16];
    for (int i = 0; i < n; ++i) {
        const int a = int(rng.below(10));
        const int b = int(rng.below(10));
        std::snprintf(id, sizeof id, "ex%05d", i);
        DatasetRecord rec;
        rec.example_id = id;
        rec.question = std::to_string(a) + " + " + std::to_string(b);
        rec.gold_answer = normalize_answer(std::to_string(a + b));
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace latlab
