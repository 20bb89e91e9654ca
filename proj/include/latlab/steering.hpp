#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "latlab/container.hpp"
#include "latlab/dataset.hpp"
#include "latlab/discovery.hpp"
#include "latlab/engine.hpp"
#include "latlab/error.hpp"
#include "latlab/sae.hpp"

namespace latlab {

struct ScaleTable {
    std::vector<double> scale;  // per latent, mean |pre-activation| with dead-feature fallback
    std::vector<double> raw;    // before fallback
    std::string corpus_id;
    int fallback_count = 0;
};

// scale[k] = mean |a_k| over all calibration rows. Features whose raw scale is
// exactly zero never fire on the corpus; they get the mean of the nonzero
// scales so an additive trigger still moves them.
inline ScaleTable build_scale_table(const Mat<float>& rows, const SaeParams<float>& sae,
                                    const std::string& corpus_id = "") {
    if (rows.rows == 0) throw DataError("build_scale_table: empty calibration corpus");
    if (rows.cols != sae.d) throw DataError("build_scale_table: corpus width does not match SAE");
    ScaleTable t;
    t.corpus_id = corpus_id;
    t.raw.assign(size_t(sae.m), 0.0);
    for (int r = 0; r < rows.rows; ++r) {
        const std::vector<float> pre = encode_pre(sae, std::span<const float>(rows.row(r)));
        for (int k = 0; k < sae.m; ++k) t.raw[size_t(k)] += std::abs(double(pre[size_t(k)]));
    }
    for (double& v : t.raw) v /= double(rows.rows);

    double nonzero_sum = 0.0;
    int nonzero_n = 0;
    for (double v : t.raw) {
        if (!std::isfinite(v)) throw NumericError("non-finite calibration scale");
        if (v > 0.0) {
            nonzero_sum += v;
            ++nonzero_n;
        }
    }
    if (nonzero_n == 0)
        throw DataError("build_scale_table: every feature has zero calibration scale");
    const double fallback = nonzero_sum / double(nonzero_n);
    t.scale = t.raw;
    for (double& v : t.scale)
        if (v == 0.0) {
            v = fallback;
            ++t.fallback_count;
        }
    return t;
}

inline ScaleTable build_scale_table(const ActivationDump& dump, const SaeParams<float>& sae,
                                    const std::string& corpus_id = "") {
    if (dump.records.empty()) throw DataError("build_scale_table: empty calibration corpus");
    return build_scale_table(dump_to_mat(dump), sae, corpus_id);
}

struct SteeringSpec {
    HookSite site{0};
    std::vector<int> features;   // S
    double alpha = 0.0;
    std::vector<int> steps{1};   // decode steps where the intervention applies
    ScaleTable scales;
    std::string sae_id;
    bool topk_exempt_steered = false;  // default: steered coordinates compete in the top-k mask
};

inline void validate_spec(const SteeringSpec& spec, const SaeParams<float>& sae) {
    if (!std::isfinite(spec.alpha)) throw DataError("steering alpha must be finite");
    if (spec.steps.empty()) throw DataError("steering step window is empty");
    if (int(spec.scales.scale.size()) != sae.m)
        throw DataError("scale table width does not match SAE");
    for (int k : spec.features)
        if (k < 0 || k >= sae.m)
            throw DataError("steered feature " + std::to_string(k) + " out of range");
}

// Additive pre-activation intervention with residual correction:
// a = enc(h); a~ = a + alpha*scale on S; returns h + (dec(phi(a~)) - dec(phi(a))).
// The decoder bias cancels, so the correction is W_dec (phi(a~) - phi(a)).
inline std::vector<float> steer_vector(std::span<const float> h, const SteeringSpec& spec,
                                       const SaeParams<float>& sae) {
    if (int(h.size()) != sae.d) throw DataError("steer_vector: width mismatch");
    validate_spec(spec, sae);
    std::vector<float> out(h.begin(), h.end());
    if (spec.alpha == 0.0 || spec.features.empty()) return out;

    const std::vector<float> a = encode_pre(sae, h);
    std::vector<float> a_tilde = a;
    for (int k : spec.features)
        a_tilde[size_t(k)] += float(spec.alpha * spec.scales.scale[size_t(k)]);

    const std::vector<float> z = apply_activation(sae, std::span<const float>(a));
    std::vector<float> z_tilde;
    if (sae.variant == SaeVariant::top_k && spec.topk_exempt_steered) {
        // Keep the unsteered mask, with the steered coordinates forced in.
        z_tilde.assign(size_t(sae.m), 0.0f);
        for (int i : top_k_indices(std::span<const float>(a), sae.k))
            z_tilde[size_t(i)] = std::max(0.0f, a_tilde[size_t(i)]);
        for (int k : spec.features) z_tilde[size_t(k)] = std::max(0.0f, a_tilde[size_t(k)]);
    } else {
        z_tilde = apply_activation(sae, std::span<const float>(a_tilde));
    }

    std::vector<float> dz(size_t(sae.m));
    for (int i = 0; i < sae.m; ++i) dz[size_t(i)] = z_tilde[size_t(i)] - z[size_t(i)];
    const std::vector<float> corr = matvec(sae.w_dec, std::span<const float>(dz));
    for (int i = 0; i < sae.d; ++i) out[size_t(i)] += corr[size_t(i)];
    if (!all_finite(std::span<const float>(out))) throw NumericError("non-finite steered vector");
    return out;
}

inline HookFn make_steering_hook(const SteeringSpec& spec, const SaeParams<float>& sae) {
    return [&spec, &sae](std::span<float> h, int step) {
        if (std::find(spec.steps.begin(), spec.steps.end(), step) == spec.steps.end()) return;
        const std::vector<float> steered =
            steer_vector(std::span<const float>(h.data(), h.size()), spec, sae);
        std::copy(steered.begin(), steered.end(), h.begin());
    };
}

inline Generation steered_generate(const ModelCheckpoint& model, const SaeParams<float>& sae,
                                   const SteeringSpec& spec, std::span<const int> prompt,
                                   const GenerationConfig& cfg, bool capture = false) {
    validate_spec(spec, sae);
    GenerateOptions opt;
    opt.config = cfg;
    opt.site = spec.site;
    opt.capture = capture;
    opt.hook = make_steering_hook(spec, sae);
    const auto [lo, hi] = std::minmax_element(spec.steps.begin(), spec.steps.end());
    opt.hook_window = StepInterval{*lo, *hi};
    return generate(model, prompt, opt);
}

struct SensitivityRow {
    int feature = -1;
    double baseline_accuracy = 0.0;
    double steered_accuracy = 0.0;
    double delta = 0.0;
    bool selected = false;  // strictly positive delta
};

namespace detail {

inline double accuracy_over(const ModelCheckpoint& model, const SaeParams<float>& sae,
                            const SteeringSpec* spec, const std::vector<DatasetRecord>& dataset,
                            const Vocab& vocab, const Scorer& scorer,
                            const std::string& prompt_template, const GenerationConfig& cfg) {
    int correct = 0;
    for (const DatasetRecord& ex : dataset) {
        const std::vector<int> prompt = vocab.encode(render_prompt(prompt_template, ex.question));
        Generation gen;
        if (spec)
            gen = steered_generate(model, sae, *spec, prompt, cfg);
        else
            gen = generate(model, prompt, GenerateOptions{cfg});
        if (scorer.correct(vocab.decode(gen.generated), ex.gold_answer)) ++correct;
    }
    return double(correct) / double(dataset.size());
}

}  // namespace detail

// Accuracy delta from steering exactly one candidate feature at a time,
// ranked by delta descending (ties toward the lower feature index).
inline std::vector<SensitivityRow> singleton_sensitivity(
    const ModelCheckpoint& model, const SaeParams<float>& sae, const DifferentialReport& candidates,
    const std::vector<DatasetRecord>& dataset, const Vocab& vocab, const Scorer& scorer,
    const SteeringSpec& spec_template, const std::string& prompt_template,
    const GenerationConfig& cfg) {
    if (candidates.selected.empty()) throw DataError("singleton_sensitivity: empty candidate set");
    if (dataset.empty()) throw DataError("singleton_sensitivity: empty dataset");

    const double baseline = detail::accuracy_over(model, sae, nullptr, dataset, vocab, scorer,
                                                  prompt_template, cfg);
    std::vector<SensitivityRow> rows;
    rows.reserve(candidates.selected.size());
    for (int k : candidates.selected) {
        SteeringSpec spec = spec_template;
        spec.features = {k};
        SensitivityRow row;
        row.feature = k;
        row.baseline_accuracy = baseline;
        row.steered_accuracy = detail::accuracy_over(model, sae, &spec, dataset, vocab, scorer,
                                                     prompt_template, cfg);
        row.delta = row.steered_accuracy - row.baseline_accuracy;
        row.selected = row.delta > 0.0;
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const SensitivityRow& x, const SensitivityRow& y) {
        if (x.delta != y.delta) return x.delta > y.delta;
        return x.feature < y.feature;
    });
    return rows;
}

}  // namespace latlab
