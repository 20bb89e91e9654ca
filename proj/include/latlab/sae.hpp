#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "latlab/container.hpp"
#include "latlab/error.hpp"
#include "latlab/mat.hpp"
#include "latlab/rng.hpp"

namespace latlab {

enum class SaeVariant { relu_l1, top_k };

inline std::string to_string(SaeVariant v) {
    return v == SaeVariant::relu_l1 ? "relu_l1" : "top_k";
}

inline SaeVariant sae_variant_from(const std::string& s) {
    if (s == "relu_l1") return SaeVariant::relu_l1;
    if (s == "top_k") return SaeVariant::top_k;
    throw DataError("unknown SAE variant \"" + s + "\"");
}

template <typename T>
struct SaeParams {
    int d = 0;  // input width
    int m = 0;  // latent width
    SaeVariant variant = SaeVariant::relu_l1;
    double lambda = 0.0;  // l1 weight (relu_l1)
    int k = 0;            // kept latents (top_k)
    Mat<T> w_enc;         // m x d
    std::vector<T> b_enc;
    Mat<T> w_dec;         // d x m
    std::vector<T> b_dec;
};

template <typename T>
SaeParams<T> init_sae(int d, int m, SaeVariant variant, double lambda, int k, uint64_t seed) {
    if (d <= 0 || m <= 0) throw DataError("SAE dimensions must be positive");
    if (variant == SaeVariant::top_k && (k <= 0 || k > m))
        throw DataError("top_k requires 0 < k <= m");
    SaeParams<T> p;
    p.d = d;
    p.m = m;
    p.variant = variant;
    p.lambda = lambda;
    p.k = k;
    p.w_enc = Mat<T>(m, d);
    p.b_enc.assign(size_t(m), T(0));
    p.w_dec = Mat<T>(d, m);
    p.b_dec.assign(size_t(d), T(0));
    Rng rng(seed);
    const double s = 1.0 / std::sqrt(double(d));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j) p.w_enc.at(i, j) = T(rng.normal() * s);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j) p.w_dec.at(j, i) = p.w_enc.at(i, j);
    return p;
}

// Indices of the k largest values, ties broken toward the lower index.
template <typename T>
std::vector<int> top_k_indices(std::span<const T> vals, int k) {
    std::vector<int> idx(vals.size());
    std::iota(idx.begin(), idx.end(), 0);
    const int kk = std::min<int>(k, int(vals.size()));
    std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(), [&](int a, int b) {
        if (vals[size_t(a)] != vals[size_t(b)]) return vals[size_t(a)] > vals[size_t(b)];
        return a < b;
    });
    idx.resize(size_t(kk));
    return idx;
}

template <typename T>
std::vector<T> encode_pre(const SaeParams<T>& p, std::span<const T> h) {
    std::vector<T> pre(size_t(p.m));
    matvec(p.w_enc, h, std::span<T>(pre));
    for (int i = 0; i < p.m; ++i) pre[size_t(i)] += p.b_enc[size_t(i)];
    return pre;
}

// phi: ReLU, then for top_k keep only the k largest entries.
template <typename T>
std::vector<T> apply_activation(const SaeParams<T>& p, std::span<const T> pre) {
    std::vector<T> z(size_t(p.m), T(0));
    if (p.variant == SaeVariant::relu_l1) {
        for (int i = 0; i < p.m; ++i) z[size_t(i)] = std::max(T(0), pre[size_t(i)]);
        return z;
    }
    for (int i : top_k_indices(pre, p.k)) z[size_t(i)] = std::max(T(0), pre[size_t(i)]);
    return z;
}

template <typename T>
std::vector<T> encode(const SaeParams<T>& p, std::span<const T> h) {
    const std::vector<T> pre = encode_pre(p, h);
    return apply_activation(p, std::span<const T>(pre));
}

template <typename T>
std::vector<T> decode(const SaeParams<T>& p, std::span<const T> z) {
    std::vector<T> h(size_t(p.d));
    matvec(p.w_dec, z, std::span<T>(h));
    for (int i = 0; i < p.d; ++i) h[size_t(i)] += p.b_dec[size_t(i)];
    return h;
}

struct SaeLoss {
    double total = 0.0;
    double recon = 0.0;
    double penalty = 0.0;
};

// Gradients are accumulated in double regardless of the parameter scalar.
struct SaeGrads {
    Mat<double> w_enc;
    std::vector<double> b_enc;
    Mat<double> w_dec;
    std::vector<double> b_dec;

    explicit SaeGrads(int d, int m)
        : w_enc(m, d), b_enc(size_t(m), 0.0), w_dec(d, m), b_dec(size_t(d), 0.0) {}
};

// Batch loss: mean squared reconstruction error plus lambda * mean l1(z).
// When grads != nullptr also fills analytic gradients of the batch loss.
// The top_k support set is treated as locally constant.
template <typename T>
SaeLoss sae_loss(const SaeParams<T>& p, const Mat<T>& batch, SaeGrads* grads = nullptr,
                 std::vector<uint8_t>* fired = nullptr) {
    if (batch.cols != p.d) throw DataError("SAE batch width mismatch");
    if (batch.rows == 0) throw DataError("SAE batch is empty");
    const double inv_n = 1.0 / double(batch.rows);
    SaeLoss loss;
    if (fired) fired->assign(size_t(p.m), 0);

    std::vector<double> dz(size_t(p.m)), da(size_t(p.m)), dh(size_t(p.d));
    for (int r = 0; r < batch.rows; ++r) {
        const auto h = batch.row(r);
        const std::vector<T> pre = encode_pre(p, std::span<const T>(h));
        const std::vector<T> z = apply_activation(p, std::span<const T>(pre));
        const std::vector<T> rec = decode(p, std::span<const T>(z));

        double se = 0.0, l1 = 0.0;
        for (int i = 0; i < p.d; ++i) {
            const double e = double(rec[size_t(i)]) - double(h[size_t(i)]);
            se += e * e;
            dh[size_t(i)] = 2.0 * e;
        }
        for (int i = 0; i < p.m; ++i) {
            l1 += double(z[size_t(i)]);
            if (fired && z[size_t(i)] > T(0)) (*fired)[size_t(i)] = 1;
        }
        loss.recon += se * inv_n;
        if (p.variant == SaeVariant::relu_l1) loss.penalty += p.lambda * l1 * inv_n;

        if (!grads) continue;
        for (int i = 0; i < p.d; ++i) {
            grads->b_dec[size_t(i)] += dh[size_t(i)] * inv_n;
            for (int j = 0; j < p.m; ++j)
                grads->w_dec.at(i, j) += dh[size_t(i)] * double(z[size_t(j)]) * inv_n;
        }
        for (int j = 0; j < p.m; ++j) {
            double acc = 0.0;
            for (int i = 0; i < p.d; ++i) acc += double(p.w_dec.at(i, j)) * dh[size_t(i)];
            if (p.variant == SaeVariant::relu_l1) acc += p.lambda;
            dz[size_t(j)] = acc;
            da[size_t(j)] = z[size_t(j)] > T(0) ? acc : 0.0;
        }
        for (int j = 0; j < p.m; ++j) {
            if (da[size_t(j)] == 0.0) continue;
            grads->b_enc[size_t(j)] += da[size_t(j)] * inv_n;
            for (int i = 0; i < p.d; ++i)
                grads->w_enc.at(j, i) += da[size_t(j)] * double(h[size_t(i)]) * inv_n;
        }
    }
    loss.total = loss.recon + loss.penalty;
    return loss;
}

// Smallest margin between a kept and a dropped pre-activation over the batch.
// Finite-difference checks on top_k are only trustworthy when this is large
// relative to the probe step.
template <typename T>
double topk_min_gap(const SaeParams<T>& p, const Mat<T>& batch) {
    if (p.variant != SaeVariant::top_k || p.k >= p.m)
        return std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    for (int r = 0; r < batch.rows; ++r) {
        std::vector<T> pre = encode_pre(p, std::span<const T>(batch.row(r)));
        std::sort(pre.begin(), pre.end(), std::greater<T>());
        gap = std::min(gap, double(pre[size_t(p.k - 1)]) - double(pre[size_t(p.k)]));
    }
    return gap;
}

struct SaeTrainConfig {
    int epochs = 5;
    int batch_size = 16;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t seed = 0;
};

struct SaeTrainReport {
    std::vector<double> epoch_loss;   // mean total loss over the epoch's batches
    std::vector<double> epoch_recon;
    std::vector<int> dead_features;   // latents that never fired in the final epoch
    int steps = 0;
};

namespace detail {

struct AdamState {
    std::vector<double> m, v;
    explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}
};

template <typename T>
void adam_update(std::span<T> param, std::span<const double> grad, AdamState& st,
                 const SaeTrainConfig& cfg, int t) {
    const double c1 = 1.0 - std::pow(cfg.beta1, double(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, double(t));
    for (size_t i = 0; i < param.size(); ++i) {
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grad[i];
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mh = st.m[i] / c1;
        const double vh = st.v[i] / c2;
        param[i] = T(double(param[i]) - cfg.lr * mh / (std::sqrt(vh) + cfg.eps));
    }
}

}  // namespace detail

template <typename T>
SaeTrainReport train_sae(SaeParams<T>& p, const Mat<T>& data, const SaeTrainConfig& cfg) {
    if (data.rows == 0) throw DataError("SAE training data is empty");
    if (data.cols != p.d) throw DataError("SAE training data width mismatch");
    if (cfg.batch_size <= 0) throw DataError("batch_size must be positive");

    Rng rng(cfg.seed);
    std::vector<int> order(size_t(data.rows));
    std::iota(order.begin(), order.end(), 0);

    detail::AdamState st_we(p.w_enc.a.size()), st_be(p.b_enc.size());
    detail::AdamState st_wd(p.w_dec.a.size()), st_bd(p.b_dec.size());

    SaeTrainReport report;
    std::vector<uint8_t> fired, epoch_fired;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        epoch_fired.assign(size_t(p.m), 0);
        double sum_total = 0.0, sum_recon = 0.0;
        int n_batches = 0;
        for (int start = 0; start < data.rows; start += cfg.batch_size) {
            const int bn = std::min(cfg.batch_size, data.rows - start);
            Mat<T> batch(bn, p.d);
            for (int r = 0; r < bn; ++r) {
                const auto src = data.row(order[size_t(start + r)]);
                std::copy(src.begin(), src.end(), batch.row(r).begin());
            }
            SaeGrads grads(p.d, p.m);
            const SaeLoss loss = sae_loss(p, batch, &grads, &fired);
            if (!std::isfinite(loss.total))
                throw NumericError("non-finite SAE loss at epoch " + std::to_string(epoch));
            for (int i = 0; i < p.m; ++i) epoch_fired[size_t(i)] |= fired[size_t(i)];
            sum_total += loss.total;
            sum_recon += loss.recon;
            ++n_batches;
            ++report.steps;
            detail::adam_update<T>(p.w_enc.a, grads.w_enc.a, st_we, cfg, report.steps);
            detail::adam_update<T>(p.b_enc, grads.b_enc, st_be, cfg, report.steps);
            detail::adam_update<T>(p.w_dec.a, grads.w_dec.a, st_wd, cfg, report.steps);
            detail::adam_update<T>(p.b_dec, grads.b_dec, st_bd, cfg, report.steps);
        }
        report.epoch_loss.push_back(sum_total / double(n_batches));
        report.epoch_recon.push_back(sum_recon / double(n_batches));
    }
    for (int i = 0; i < p.m; ++i)
        if (!epoch_fired[size_t(i)]) report.dead_features.push_back(i);
    return report;
}

// Max relative error between analytic and central-difference gradients.
inline double sae_grad_check(const SaeParams<double>& p, const Mat<double>& batch,
                             double eps = 1e-5) {
    SaeGrads grads(p.d, p.m);
    sae_loss(p, batch, &grads);

    SaeParams<double> q = p;
    double worst = 0.0;
    const auto probe = [&](double* param, double analytic) {
        const double keep = *param;
        *param = keep + eps;
        const double up = sae_loss(q, batch).total;
        *param = keep - eps;
        const double dn = sae_loss(q, batch).total;
        *param = keep;
        const double numeric = (up - dn) / (2.0 * eps);
        const double rel = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic) + std::abs(numeric));
        worst = std::max(worst, rel);
    };
    for (size_t i = 0; i < q.w_enc.a.size(); ++i) probe(&q.w_enc.a[i], grads.w_enc.a[i]);
    for (size_t i = 0; i < q.b_enc.size(); ++i) probe(&q.b_enc[i], grads.b_enc[i]);
    for (size_t i = 0; i < q.w_dec.a.size(); ++i) probe(&q.w_dec.a[i], grads.w_dec.a[i]);
    for (size_t i = 0; i < q.b_dec.size(); ++i) probe(&q.b_dec[i], grads.b_dec[i]);
    return worst;
}

inline void save_sae(const std::filesystem::path& path, const SaeParams<float>& p) {
    TensorFile t;
    t.meta["d"] = p.d;
    t.meta["m"] = p.m;
    t.meta["variant"] = to_string(p.variant);
    t.meta["lambda"] = p.lambda;
    t.meta["k"] = p.k;
    t.add("w_enc", p.w_enc);
    t.add("b_enc", {p.m}, p.b_enc);
    t.add("w_dec", p.w_dec);
    t.add("b_dec", {p.d}, p.b_dec);
    t.write(path, ContainerKind::sae);
}

inline SaeParams<float> load_sae(const std::filesystem::path& path) {
    const TensorFile t = TensorFile::read(path, ContainerKind::sae);
    SaeParams<float> p;
    p.d = t.meta.value("d", 0);
    p.m = t.meta.value("m", 0);
    if (p.d <= 0 || p.m <= 0) throw DataError("SAE header dimensions missing in " + path.string());
    p.variant = sae_variant_from(t.meta.value("variant", std::string()));
    p.lambda = t.meta.value("lambda", 0.0);
    p.k = t.meta.value("k", 0);
    if (p.variant == SaeVariant::top_k && (p.k <= 0 || p.k > p.m))
        throw DataError("SAE header: top_k requires 0 < k <= m");
    p.w_enc = t.matrix("w_enc", p.m, p.d);
    p.b_enc = t.tensor("b_enc", {p.m});
    p.w_dec = t.matrix("w_dec", p.d, p.m);
    p.b_dec = t.tensor("b_dec", {p.d});
    for (const auto* v : {&p.w_enc.a, &p.b_enc, &p.w_dec.a, &p.b_dec})
        if (!all_finite(std::span<const float>(*v)))
            throw DataError("non-finite values in SAE file " + path.string());
    return p;
}

template <typename From, typename To>
SaeParams<To> cast_sae(const SaeParams<From>& p) {
    SaeParams<To> q;
    q.d = p.d;
    q.m = p.m;
    q.variant = p.variant;
    q.lambda = p.lambda;
    q.k = p.k;
    q.w_enc = Mat<To>(p.m, p.d);
    q.w_dec = Mat<To>(p.d, p.m);
    for (size_t i = 0; i < p.w_enc.a.size(); ++i) q.w_enc.a[i] = To(p.w_enc.a[i]);
    for (size_t i = 0; i < p.w_dec.a.size(); ++i) q.w_dec.a[i] = To(p.w_dec.a[i]);
    q.b_enc.assign(p.b_enc.begin(), p.b_enc.end());
    q.b_dec.assign(p.b_dec.begin(), p.b_dec.end());
    return q;
}

}  // namespace latlab
