#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latlab/container.hpp"
#include "latlab/dataset.hpp"
#include "latlab/engine.hpp"
#include "latlab/error.hpp"
#include "latlab/sae.hpp"
#include "latlab/tokenizer.hpp"

namespace latlab {

enum class AggregationKind { first_step, mean_pool, max_pool };

inline std::string to_string(AggregationKind k) {
    switch (k) {
        case AggregationKind::first_step: return "first_step";
        case AggregationKind::mean_pool: return "mean_pool";
        default: return "max_pool";
    }
}

inline AggregationKind aggregation_from(const std::string& s) {
    if (s == "first_step") return AggregationKind::first_step;
    if (s == "mean_pool") return AggregationKind::mean_pool;
    if (s == "max_pool") return AggregationKind::max_pool;
    throw DataError("unknown aggregation \"" + s + "\"");
}

// Collapses per-step latent vectors (steps 1..n) into one vector.
inline std::vector<double> aggregate(const std::vector<std::vector<float>>& latents,
                                     AggregationKind kind) {
    if (latents.empty()) throw DataError("aggregate: empty step list");
    const size_t m = latents.front().size();
    for (const auto& v : latents)
        if (v.size() != m) throw DataError("aggregate: step vectors differ in width");
    std::vector<double> out(m, 0.0);
    switch (kind) {
        case AggregationKind::first_step:
            for (size_t i = 0; i < m; ++i) out[i] = double(latents.front()[i]);
            break;
        case AggregationKind::mean_pool:
            for (const auto& v : latents)
                for (size_t i = 0; i < m; ++i) out[i] += double(v[i]);
            for (size_t i = 0; i < m; ++i) out[i] /= double(latents.size());
            break;
        case AggregationKind::max_pool:
            for (size_t i = 0; i < m; ++i) out[i] = double(latents.front()[i]);
            for (const auto& v : latents)
                for (size_t i = 0; i < m; ++i) out[i] = std::max(out[i], double(v[i]));
            break;
    }
    return out;
}

struct AggregatedExample {
    std::string example_id;
    std::string condition;
    std::vector<double> z;
};

// Per-condition elementwise means, reduced in example-id order so the result
// is invariant to corpus permutation.
inline std::pair<std::vector<double>, std::vector<double>> condition_means(
    std::span<const AggregatedExample> corpus, const std::string& cond_a,
    const std::string& cond_b) {
    if (corpus.empty()) throw DataError("condition_means: empty corpus");
    const size_t m = corpus.front().z.size();
    std::vector<size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(), [&](size_t x, size_t y) {
        if (corpus[x].example_id != corpus[y].example_id)
            return corpus[x].example_id < corpus[y].example_id;
        return x < y;
    });

    std::vector<double> sum_a(m, 0.0), sum_b(m, 0.0);
    size_t n_a = 0, n_b = 0;
    for (size_t idx : order) {
        const AggregatedExample& e = corpus[idx];
        if (e.z.size() != m) throw DataError("condition_means: latent width mismatch");
        std::vector<double>* sum = nullptr;
        if (e.condition == cond_a) {
            sum = &sum_a;
            ++n_a;
        } else if (e.condition == cond_b) {
            sum = &sum_b;
            ++n_b;
        } else {
            throw DataError("condition_means: unknown condition label \"" + e.condition + "\"");
        }
        for (size_t i = 0; i < m; ++i) (*sum)[i] += e.z[i];
    }
    if (n_a == 0) throw DataError("condition_means: no examples for condition \"" + cond_a + "\"");
    if (n_b == 0) throw DataError("condition_means: no examples for condition \"" + cond_b + "\"");
    for (size_t i = 0; i < m; ++i) {
        sum_a[i] /= double(n_a);
        sum_b[i] /= double(n_b);
    }
    return {std::move(sum_a), std::move(sum_b)};
}

struct DifferentialReport {
    int m = 0;
    std::vector<double> mu_a, mu_b;
    std::vector<double> delta;   // mu_a - mu_b
    std::vector<int> ranking;    // by |delta| descending, ties toward lower index
    int K = 0;
    std::vector<int> selected;   // first min(K, m) of ranking

    std::string condition_a, condition_b;
    int site_layer = 0;
    std::string aggregation = "first_step";
};

inline DifferentialReport differential_select(std::span<const double> mu_a,
                                              std::span<const double> mu_b, int K) {
    if (mu_a.size() != mu_b.size()) throw DataError("differential_select: width mismatch");
    if (mu_a.empty()) throw DataError("differential_select: empty means");
    if (K < 1) throw DataError("differential_select: K must be >= 1");
    DifferentialReport rep;
    rep.m = int(mu_a.size());
    rep.mu_a.assign(mu_a.begin(), mu_a.end());
    rep.mu_b.assign(mu_b.begin(), mu_b.end());
    rep.delta.resize(mu_a.size());
    for (size_t i = 0; i < mu_a.size(); ++i) rep.delta[i] = mu_a[i] - mu_b[i];
    rep.ranking.resize(mu_a.size());
    std::iota(rep.ranking.begin(), rep.ranking.end(), 0);
    std::sort(rep.ranking.begin(), rep.ranking.end(), [&](int x, int y) {
        const double ax = std::abs(rep.delta[size_t(x)]);
        const double ay = std::abs(rep.delta[size_t(y)]);
        if (ax != ay) return ax > ay;
        return x < y;
    });
    rep.K = K;
    rep.selected.assign(rep.ranking.begin(), rep.ranking.begin() + std::min<size_t>(size_t(K), mu_a.size()));
    return rep;
}

// Discovery core shared by the model-driven path and latent-space fixtures.
inline DifferentialReport discover_from_aggregates(std::span<const AggregatedExample> corpus,
                                                   const std::string& cond_a,
                                                   const std::string& cond_b, int K) {
    const auto [mu_a, mu_b] = condition_means(corpus, cond_a, cond_b);
    DifferentialReport rep = differential_select(mu_a, mu_b, K);
    rep.condition_a = cond_a;
    rep.condition_b = cond_b;
    return rep;
}

struct ConditionPrompt {
    std::string label;
    std::string question_template;  // "{question}" is replaced by the example question
};

inline std::string render_prompt(const std::string& tmpl, const std::string& question) {
    std::string out = tmpl;
    const std::string key = "{question}";
    size_t pos = 0;
    while ((pos = out.find(key, pos)) != std::string::npos) {
        out.replace(pos, key.size(), question);
        pos += question.size();
    }
    return out;
}

struct DiscoveryConfig {
    AggregationKind kind = AggregationKind::first_step;
    int K = 1;
    HookSite site{0};
    GenerationConfig gen{};
};

struct DiscoveryResult {
    DifferentialReport report;
    ActivationDump dump;  // captured site streams (width d_model), capture order
};

// Stage one end to end: generate under both conditions, capture the site
// stream each decode step, encode, aggregate, contrast.
inline DiscoveryResult discover(const ModelCheckpoint& model, const SaeParams<float>& sae,
                                const std::vector<DatasetRecord>& dataset,
                                const ConditionPrompt& cond_a, const ConditionPrompt& cond_b,
                                const Vocab& vocab, const DiscoveryConfig& cfg) {
    if (dataset.empty()) throw DataError("discover: empty dataset");
    if (sae.d != model.d_model) throw DataError("discover: SAE width does not match d_model");
    if (cond_a.label == cond_b.label) throw DataError("discover: condition labels must differ");

    DiscoveryResult res;
    res.dump.width = model.d_model;
    res.dump.labels = {cond_a.label, cond_b.label};

    GenerateOptions opt;
    opt.config = cfg.gen;
    opt.site = cfg.site;
    opt.capture = true;

    std::vector<AggregatedExample> corpus;
    corpus.reserve(dataset.size() * 2);
    for (const DatasetRecord& ex : dataset) {
        const uint32_t ex_hash = uint32_t(fnv1a64(ex.example_id));
        for (int c = 0; c < 2; ++c) {
            const ConditionPrompt& cond = c == 0 ? cond_a : cond_b;
            const std::vector<int> prompt = vocab.encode(render_prompt(cond.question_template, ex.question));
            const Generation gen = generate(model, prompt, opt);
            std::vector<std::vector<float>> per_step_z;
            per_step_z.reserve(gen.site_stream.size());
            int step = 1;
            for (const std::vector<float>& h : gen.site_stream) {
                res.dump.records.push_back({ex_hash, uint32_t(c), uint32_t(cfg.site.layer),
                                            uint32_t(step), h});
                per_step_z.push_back(encode(sae, std::span<const float>(h)));
                ++step;
            }
            corpus.push_back({ex.example_id, cond.label, aggregate(per_step_z, cfg.kind)});
        }
    }

    res.report = discover_from_aggregates(corpus, cond_a.label, cond_b.label, cfg.K);
    res.report.site_layer = cfg.site.layer;
    res.report.aggregation = to_string(cfg.kind);
    return res;
}

inline void save_report(const std::filesystem::path& manifest_path,
                        const std::filesystem::path& sidecar_path, const DifferentialReport& rep) {
    std::vector<uint8_t> bytes(rep.delta.size() * 4);
    for (size_t i = 0; i < rep.delta.size(); ++i) {
        const float f = float(rep.delta[i]);
        std::memcpy(bytes.data() + i * 4, &f, 4);
    }
    write_file_atomic(sidecar_path, bytes);

    json j;
    j["version"] = 1;
    j["m"] = rep.m;
    j["K"] = rep.K;
    j["condition_a"] = rep.condition_a;
    j["condition_b"] = rep.condition_b;
    j["site"] = json{{"layer", rep.site_layer}};
    j["aggregation"] = rep.aggregation;
    j["selected"] = rep.selected;
    j["delta_file"] = sidecar_path.filename().string();
    j["mu_a"] = rep.mu_a;
    j["mu_b"] = rep.mu_b;
    const std::string text = j.dump(2) + "\n";
    write_file_atomic(manifest_path, std::vector<uint8_t>(text.begin(), text.end()));
}

inline DifferentialReport load_report(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open report manifest " + manifest_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed report manifest " + manifest_path.string() + ": " + e.what());
    }
    DifferentialReport rep;
    rep.m = j.value("m", 0);
    rep.K = j.value("K", 0);
    if (rep.m <= 0 || rep.K <= 0) throw DataError("report manifest missing m or K");
    rep.condition_a = j.value("condition_a", std::string());
    rep.condition_b = j.value("condition_b", std::string());
    rep.site_layer = j.contains("site") ? j["site"].value("layer", 0) : 0;
    rep.aggregation = j.value("aggregation", std::string("first_step"));
    rep.selected = j.value("selected", std::vector<int>());
    rep.mu_a = j.value("mu_a", std::vector<double>());
    rep.mu_b = j.value("mu_b", std::vector<double>());

    const std::filesystem::path sidecar =
        manifest_path.parent_path() / j.value("delta_file", std::string("delta.f32"));
    std::ifstream bin(sidecar, std::ios::binary);
    if (!bin) throw DataError("cannot open delta sidecar " + sidecar.string());
    std::vector<float> delta(size_t(rep.m));
    bin.read(reinterpret_cast<char*>(delta.data()), std::streamsize(delta.size() * 4));
    if (bin.gcount() != std::streamsize(delta.size() * 4))
        throw DataError("delta sidecar truncated: " + sidecar.string());
    rep.delta.assign(delta.begin(), delta.end());

    rep.ranking.resize(size_t(rep.m));
    std::iota(rep.ranking.begin(), rep.ranking.end(), 0);
    std::sort(rep.ranking.begin(), rep.ranking.end(), [&](int x, int y) {
        const double ax = std::abs(rep.delta[size_t(x)]);
        const double ay = std::abs(rep.delta[size_t(y)]);
        if (ax != ay) return ax > ay;
        return x < y;
    });
    for (int k : rep.selected)
        if (k < 0 || k >= rep.m) throw DataError("report manifest: selected index out of range");
    return rep;
}

}  // namespace latlab
