#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "latlab/checkpoint.hpp"
#include "latlab/error.hpp"
#include "latlab/mat.hpp"
#include "latlab/rng.hpp"

namespace latlab {

// Decode steps are 1-based: step 1 is the pass over the last prompt position
// (it produces the first generated token), step t >= 2 is the pass over
// generated token t-1.
struct StepInterval {
    int first = 1;
    int last = std::numeric_limits<int>::max();
    bool contains(int step) const { return step >= first && step <= last; }
};

// Residual-stream site: the post-block stream of blocks[layer].
struct HookSite {
    int layer = 0;
};

// Receives the site stream for the current position and may modify it.
using HookFn = std::function<void(std::span<float> h, int step)>;

enum class Sampling { greedy, temperature };

struct GenerationConfig {
    int max_new_tokens = 32;
    Sampling sampling = Sampling::greedy;
    double temperature = 1.0;
    uint64_t seed = 0;
    int stop_token = -1;  // -1 disables
};

struct GenerateOptions {
    GenerationConfig config;
    HookSite site{0};
    bool capture = false;        // record the site stream at every decode step
    HookFn hook;                 // optional stream edit at the site
    StepInterval hook_window{};  // decode steps where the hook applies
};

struct Generation {
    std::vector<int> generated;                    // excludes the prompt, includes any stop token
    std::vector<std::vector<float>> site_stream;   // per decode step, post-hook, d_model wide
};

namespace detail {

inline void layer_norm(std::span<const float> x, std::span<const float> g, std::span<const float> b,
                       std::span<float> out) {
    const size_t d = x.size();
    double mean = 0.0;
    for (float v : x) mean += v;
    mean /= double(d);
    double var = 0.0;
    for (float v : x) {
        const double c = double(v) - mean;
        var += c * c;
    }
    var /= double(d);
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (size_t i = 0; i < d; ++i)
        out[i] = float(((double(x[i]) - mean) * inv) * double(g[i]) + double(b[i]));
}

inline float gelu(float x) {
    const double xd = x;
    const double c = 0.7978845608028654;  // sqrt(2/pi)
    return float(0.5 * xd * (1.0 + std::tanh(c * (xd + 0.044715 * xd * xd * xd))));
}

inline void add_bias(std::span<float> x, std::span<const float> b) {
    for (size_t i = 0; i < x.size(); ++i) x[i] += b[i];
}

}  // namespace detail

class Engine {
public:
    explicit Engine(const ModelCheckpoint& m) : m_(&m), d_head_(m.d_model / m.n_heads) {
        kcache_.resize(m.n_layers, Mat<float>(m.max_seq, m.d_model));
        vcache_.resize(m.n_layers, Mat<float>(m.max_seq, m.d_model));
    }

    const ModelCheckpoint& model() const { return *m_; }

    void reset() { cached_ = 0; }

    // Runs one token at the next position. decode_step <= 0 means a prompt
    // position before the last one (no hook, no capture).
    std::vector<float> step(int token, int decode_step, const GenerateOptions& opt,
                            std::vector<float>* capture_out) {
        const ModelCheckpoint& m = *m_;
        const int pos = cached_;
        if (pos >= m.max_seq) throw DataError("sequence exceeds max_seq=" + std::to_string(m.max_seq));
        if (token < 0 || token >= m.vocab_size)
            throw DataError("token id " + std::to_string(token) + " out of range");
        if (opt.site.layer < 0 || opt.site.layer >= m.n_layers)
            throw DataError("hook layer " + std::to_string(opt.site.layer) + " out of range");

        std::vector<float> h(size_t(m.d_model));
        for (int i = 0; i < m.d_model; ++i)
            h[size_t(i)] = m.tok_embed.at(token, i) + m.pos_embed.at(pos, i);

        std::vector<float> normed(size_t(m.d_model));
        std::vector<float> q(size_t(m.d_model)), attn_out(size_t(m.d_model));
        std::vector<float> ff(size_t(m.d_ff));
        std::vector<double> scores(size_t(pos) + 1);

        for (int layer = 0; layer < m.n_layers; ++layer) {
            const BlockWeights& b = m.blocks[size_t(layer)];

            detail::layer_norm(h, b.ln1_g, b.ln1_b, normed);
            matvec(b.wq, std::span<const float>(normed), std::span<float>(q));
            detail::add_bias(q, b.bq);
            matvec(b.wk, std::span<const float>(normed), kcache_[size_t(layer)].row(pos));
            detail::add_bias(kcache_[size_t(layer)].row(pos), b.bk);
            matvec(b.wv, std::span<const float>(normed), vcache_[size_t(layer)].row(pos));
            detail::add_bias(vcache_[size_t(layer)].row(pos), b.bv);

            const double inv_sqrt = 1.0 / std::sqrt(double(d_head_));
            std::fill(attn_out.begin(), attn_out.end(), 0.0f);
            for (int head = 0; head < m.n_heads; ++head) {
                const int off = head * d_head_;
                double max_s = -std::numeric_limits<double>::infinity();
                for (int t = 0; t <= pos; ++t) {
                    double s = 0.0;
                    const auto krow = kcache_[size_t(layer)].row(t);
                    for (int i = 0; i < d_head_; ++i)
                        s += double(q[size_t(off + i)]) * double(krow[size_t(off + i)]);
                    scores[size_t(t)] = s * inv_sqrt;
                    max_s = std::max(max_s, scores[size_t(t)]);
                }
                double denom = 0.0;
                for (int t = 0; t <= pos; ++t) {
                    scores[size_t(t)] = std::exp(scores[size_t(t)] - max_s);
                    denom += scores[size_t(t)];
                }
                for (int i = 0; i < d_head_; ++i) {
                    double acc = 0.0;
                    for (int t = 0; t <= pos; ++t)
                        acc += scores[size_t(t)] * double(vcache_[size_t(layer)].at(t, off + i));
                    attn_out[size_t(off + i)] = float(acc / denom);
                }
            }
            std::vector<float> proj = matvec(b.wo, std::span<const float>(attn_out));
            for (int i = 0; i < m.d_model; ++i) h[size_t(i)] += proj[size_t(i)] + b.bo[size_t(i)];

            detail::layer_norm(h, b.ln2_g, b.ln2_b, normed);
            matvec(b.w_in, std::span<const float>(normed), std::span<float>(ff));
            for (int i = 0; i < m.d_ff; ++i) ff[size_t(i)] = detail::gelu(ff[size_t(i)] + b.b_in[size_t(i)]);
            std::vector<float> mlp = matvec(b.w_out, std::span<const float>(ff));
            for (int i = 0; i < m.d_model; ++i) h[size_t(i)] += mlp[size_t(i)] + b.b_out[size_t(i)];

            if (layer == opt.site.layer && decode_step >= 1) {
                if (opt.hook && opt.hook_window.contains(decode_step))
                    opt.hook(std::span<float>(h), decode_step);
                if (capture_out) *capture_out = h;
            }
        }

        detail::layer_norm(h, m.lnf_g, m.lnf_b, normed);
        std::vector<float> logits(size_t(m.vocab_size));
        matvec(m.unembed, std::span<const float>(normed), std::span<float>(logits));
        if (!all_finite(std::span<const float>(logits)))
            throw NumericError("non-finite logits at position " + std::to_string(pos));
        ++cached_;
        return logits;
    }

private:
    const ModelCheckpoint* m_;
    int d_head_;
    int cached_ = 0;
    std::vector<Mat<float>> kcache_, vcache_;
};

namespace detail {

inline int argmax_lowest(std::span<const float> v) {
    int best = 0;
    for (int i = 1; i < int(v.size()); ++i)
        if (v[size_t(i)] > v[size_t(best)]) best = i;
    return best;
}

inline int sample_logits(std::span<const float> logits, const GenerationConfig& cfg, Rng& rng) {
    if (cfg.sampling == Sampling::greedy) return argmax_lowest(logits);
    if (!(cfg.temperature > 0.0)) throw DataError("temperature must be positive");
    double max_l = -std::numeric_limits<double>::infinity();
    for (float l : logits) max_l = std::max(max_l, double(l));
    std::vector<double> p(logits.size());
    double denom = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp((double(logits[i]) - max_l) / cfg.temperature);
        denom += p[i];
    }
    double u = rng.uniform() * denom;
    for (size_t i = 0; i < logits.size(); ++i) {
        u -= p[i];
        if (u <= 0.0) return int(i);
    }
    return int(logits.size()) - 1;
}

}  // namespace detail

inline Generation generate(const ModelCheckpoint& m, std::span<const int> prompt,
                           const GenerateOptions& opt) {
    if (prompt.empty()) throw DataError("empty prompt");
    if (int(prompt.size()) > m.max_seq)
        throw DataError("prompt length " + std::to_string(prompt.size()) + " exceeds max_seq=" +
                        std::to_string(m.max_seq));
    Engine eng(m);
    Rng rng(opt.config.seed);
    Generation out;

    std::vector<float> logits;
    std::vector<float> capture;
    for (size_t i = 0; i + 1 < prompt.size(); ++i) eng.step(prompt[i], 0, opt, nullptr);

    int step = 1;
    int token = prompt.back();
    const int limit = std::min(opt.config.max_new_tokens, m.max_seq - int(prompt.size()) + 1);
    while (step <= limit) {
        logits = eng.step(token, step, opt, opt.capture ? &capture : nullptr);
        if (opt.capture) out.site_stream.push_back(capture);
        const int next = detail::sample_logits(logits, opt.config, rng);
        out.generated.push_back(next);
        if (next == opt.config.stop_token) break;
        token = next;
        ++step;
    }
    return out;
}

}  // namespace latlab
