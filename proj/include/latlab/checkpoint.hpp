#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "latlab/container.hpp"
#include "latlab/error.hpp"
#include "latlab/mat.hpp"

namespace latlab {

// Pre-norm decoder-only transformer: learned absolute position embeddings,
// multi-head causal attention, GELU MLP, final layer norm, linear unembedding.
struct BlockWeights {
    std::vector<float> ln1_g, ln1_b;
    Mat<float> wq, wk, wv, wo;          // d x d
    std::vector<float> bq, bk, bv, bo;  // d
    std::vector<float> ln2_g, ln2_b;
    Mat<float> w_in;                    // d_ff x d
    std::vector<float> b_in;            // d_ff
    Mat<float> w_out;                   // d x d_ff
    std::vector<float> b_out;           // d
};

struct ModelCheckpoint {
    int d_model = 0;
    int n_layers = 0;
    int n_heads = 0;
    int vocab_size = 0;
    int max_seq = 0;
    int d_ff = 0;

    Mat<float> tok_embed;  // vocab x d
    Mat<float> pos_embed;  // max_seq x d
    std::vector<BlockWeights> blocks;
    std::vector<float> lnf_g, lnf_b;
    Mat<float> unembed;    // vocab x d

    // Zero-initialized model with identity norms.
    static ModelCheckpoint zeros(int d_model, int n_layers, int n_heads, int vocab_size, int max_seq,
                                 int d_ff = 0) {
        if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || vocab_size <= 0 || max_seq <= 0)
            throw DataError("checkpoint dimensions must be positive");
        if (d_model % n_heads != 0) throw DataError("n_heads must divide d_model");
        ModelCheckpoint m;
        m.d_model = d_model;
        m.n_layers = n_layers;
        m.n_heads = n_heads;
        m.vocab_size = vocab_size;
        m.max_seq = max_seq;
        m.d_ff = d_ff > 0 ? d_ff : 4 * d_model;
        m.tok_embed = Mat<float>(vocab_size, d_model);
        m.pos_embed = Mat<float>(max_seq, d_model);
        m.blocks.resize(n_layers);
        for (BlockWeights& b : m.blocks) {
            b.ln1_g.assign(d_model, 1.0f);
            b.ln1_b.assign(d_model, 0.0f);
            b.wq = Mat<float>(d_model, d_model);
            b.wk = Mat<float>(d_model, d_model);
            b.wv = Mat<float>(d_model, d_model);
            b.wo = Mat<float>(d_model, d_model);
            b.bq.assign(d_model, 0.0f);
            b.bk.assign(d_model, 0.0f);
            b.bv.assign(d_model, 0.0f);
            b.bo.assign(d_model, 0.0f);
            b.ln2_g.assign(d_model, 1.0f);
            b.ln2_b.assign(d_model, 0.0f);
            b.w_in = Mat<float>(m.d_ff, d_model);
            b.b_in.assign(m.d_ff, 0.0f);
            b.w_out = Mat<float>(d_model, m.d_ff);
            b.b_out.assign(d_model, 0.0f);
        }
        m.lnf_g.assign(d_model, 1.0f);
        m.lnf_b.assign(d_model, 0.0f);
        m.unembed = Mat<float>(vocab_size, d_model);
        return m;
    }
};

namespace detail {

inline void check_finite_named(std::span<const float> v, const std::string& name) {
    if (!all_finite(v)) throw DataError("non-finite values in tensor \"" + name + "\"");
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& m) {
    TensorFile t;
    t.meta["d_model"] = m.d_model;
    t.meta["n_layers"] = m.n_layers;
    t.meta["n_heads"] = m.n_heads;
    t.meta["vocab_size"] = m.vocab_size;
    t.meta["max_seq"] = m.max_seq;
    t.meta["d_ff"] = m.d_ff;
    t.add("tok_embed", m.tok_embed);
    t.add("pos_embed", m.pos_embed);
    for (int i = 0; i < m.n_layers; ++i) {
        const BlockWeights& b = m.blocks[i];
        const std::string p = "blocks." + std::to_string(i) + ".";
        t.add(p + "ln1.g", {m.d_model}, b.ln1_g);
        t.add(p + "ln1.b", {m.d_model}, b.ln1_b);
        t.add(p + "attn.wq", b.wq);
        t.add(p + "attn.wk", b.wk);
        t.add(p + "attn.wv", b.wv);
        t.add(p + "attn.wo", b.wo);
        t.add(p + "attn.bq", {m.d_model}, b.bq);
        t.add(p + "attn.bk", {m.d_model}, b.bk);
        t.add(p + "attn.bv", {m.d_model}, b.bv);
        t.add(p + "attn.bo", {m.d_model}, b.bo);
        t.add(p + "ln2.g", {m.d_model}, b.ln2_g);
        t.add(p + "ln2.b", {m.d_model}, b.ln2_b);
        t.add(p + "mlp.w_in", b.w_in);
        t.add(p + "mlp.b_in", {m.d_ff}, b.b_in);
        t.add(p + "mlp.w_out", b.w_out);
        t.add(p + "mlp.b_out", {m.d_model}, b.b_out);
    }
    t.add("ln_f.g", {m.d_model}, m.lnf_g);
    t.add("ln_f.b", {m.d_model}, m.lnf_b);
    t.add("unembed", m.unembed);
    t.write(path, ContainerKind::checkpoint);
}

inline ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
    const TensorFile t = TensorFile::read(path, ContainerKind::checkpoint);
    const int d = t.meta.value("d_model", 0);
    const int n_layers = t.meta.value("n_layers", 0);
    const int n_heads = t.meta.value("n_heads", 0);
    const int vocab = t.meta.value("vocab_size", 0);
    const int max_seq = t.meta.value("max_seq", 0);
    const int d_ff = t.meta.value("d_ff", 0);
    if (d <= 0 || n_layers <= 0 || n_heads <= 0 || vocab <= 0 || max_seq <= 0 || d_ff <= 0)
        throw DataError("checkpoint header dimensions missing or non-positive in " + path.string());
    if (d % n_heads != 0) throw DataError("checkpoint header: n_heads does not divide d_model");

    ModelCheckpoint m = ModelCheckpoint::zeros(d, n_layers, n_heads, vocab, max_seq, d_ff);

    const auto vec = [&](const std::string& name, int len) {
        std::vector<float> v = t.tensor(name, {len});
        detail::check_finite_named(v, name);
        return v;
    };
    const auto mat = [&](const std::string& name, int r, int c) {
        Mat<float> v = t.matrix(name, r, c);
        detail::check_finite_named(v.a, name);
        return v;
    };

    m.tok_embed = mat("tok_embed", vocab, d);
    m.pos_embed = mat("pos_embed", max_seq, d);
    for (int i = 0; i < n_layers; ++i) {
        BlockWeights& b = m.blocks[i];
        const std::string p = "blocks." + std::to_string(i) + ".";
        b.ln1_g = vec(p + "ln1.g", d);
        b.ln1_b = vec(p + "ln1.b", d);
        b.wq = mat(p + "attn.wq", d, d);
        b.wk = mat(p + "attn.wk", d, d);
        b.wv = mat(p + "attn.wv", d, d);
        b.wo = mat(p + "attn.wo", d, d);
        b.bq = vec(p + "attn.bq", d);
        b.bk = vec(p + "attn.bk", d);
        b.bv = vec(p + "attn.bv", d);
        b.bo = vec(p + "attn.bo", d);
        b.ln2_g = vec(p + "ln2.g", d);
        b.ln2_b = vec(p + "ln2.b", d);
        b.w_in = mat(p + "mlp.w_in", d_ff, d);
        b.b_in = vec(p + "mlp.b_in", d_ff);
        b.w_out = mat(p + "mlp.w_out", d, d_ff);
        b.b_out = vec(p + "mlp.b_out", d);
    }
    m.lnf_g = vec("ln_f.g", d);
    m.lnf_b = vec("ln_f.b", d);
    m.unembed = mat("unembed", vocab, d);
    return m;
}

}  // namespace latlab
