#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "latlab/dataset.hpp"
#include "latlab/discovery.hpp"
#include "latlab/engine.hpp"
#include "latlab/error.hpp"
#include "latlab/fixtures.hpp"
#include "latlab/sae.hpp"
#include "latlab/steering.hpp"
#include "latlab/tokenizer.hpp"

namespace latlab {

struct EvalContext {
    const ModelCheckpoint* model = nullptr;
    const SaeParams<float>* sae = nullptr;  // required only when a condition steers
    const Vocab* vocab = nullptr;
    Scorer scorer;
    GenerationConfig gen;
};

struct EvalCondition {
    std::string label;
    std::string prompt_template;
    const SteeringSpec* steering = nullptr;
};

struct EvalOutcome {
    struct PerExample {
        std::string example_id;
        bool correct = false;
        int tokens = 0;  // generated tokens, terminator included
    };
    std::string label;
    double accuracy = 0.0;
    double token_mean = 0.0;
    double token_std = 0.0;  // sample std, 0 when n < 2
    std::vector<PerExample> per_example;
};

namespace detail {

inline void finish_outcome(EvalOutcome& out) {
    const size_t n = out.per_example.size();
    size_t correct = 0;
    double sum = 0.0;
    for (const auto& e : out.per_example) {
        correct += e.correct ? 1 : 0;
        sum += double(e.tokens);
    }
    out.accuracy = double(correct) / double(n);
    out.token_mean = sum / double(n);
    double ss = 0.0;
    for (const auto& e : out.per_example) {
        const double c = double(e.tokens) - out.token_mean;
        ss += c * c;
    }
    out.token_std = n > 1 ? std::sqrt(ss / double(n - 1)) : 0.0;
}

}  // namespace detail

inline std::vector<EvalOutcome> evaluate_conditions(const EvalContext& ctx,
                                                    const std::vector<DatasetRecord>& dataset,
                                                    const std::vector<EvalCondition>& conditions) {
    if (!ctx.model || !ctx.vocab) throw DataError("evaluate_conditions: missing model or vocab");
    if (dataset.empty()) throw DataError("evaluate_conditions: empty dataset");
    if (conditions.empty()) throw DataError("evaluate_conditions: no conditions");

    std::vector<EvalOutcome> outcomes;
    for (const EvalCondition& cond : conditions) {
        if (cond.steering && !ctx.sae)
            throw DataError("evaluate_conditions: steered condition without an SAE");
        EvalOutcome out;
        out.label = cond.label;
        for (const DatasetRecord& ex : dataset) {
            const std::vector<int> prompt =
                ctx.vocab->encode(render_prompt(cond.prompt_template, ex.question));
            Generation gen;
            if (cond.steering)
                gen = steered_generate(*ctx.model, *ctx.sae, *cond.steering, prompt, ctx.gen);
            else
                gen = generate(*ctx.model, prompt, GenerateOptions{ctx.gen});
            EvalOutcome::PerExample pe;
            pe.example_id = ex.example_id;
            pe.correct = ctx.scorer.correct(ctx.vocab->decode(gen.generated), ex.gold_answer);
            pe.tokens = int(gen.generated.size());
            out.per_example.push_back(std::move(pe));
        }
        detail::finish_outcome(out);
        outcomes.push_back(std::move(out));
    }
    return outcomes;
}

struct StepStat {
    int step = 0;
    double mean = 0.0;
    double std_dev = 0.0;  // sample std over examples reaching the step
    int n = 0;
};

struct DynamicsTrace {
    int feature = -1;
    std::vector<std::string> conditions;
    std::vector<std::vector<StepStat>> series;  // parallel to conditions
};

// Per-step post-activation of one feature during unsteered generation,
// averaged across examples per condition. Examples that stop early simply
// leave the later steps' sample counts smaller.
inline DynamicsTrace trace_dynamics(const EvalContext& ctx,
                                    const std::vector<DatasetRecord>& dataset,
                                    const std::vector<EvalCondition>& conditions, int feature,
                                    int horizon, HookSite site) {
    if (!ctx.model || !ctx.sae || !ctx.vocab) throw DataError("trace_dynamics: missing inputs");
    if (horizon < 1) throw DataError("trace_dynamics: horizon must be >= 1");
    if (feature < 0 || feature >= ctx.sae->m) throw DataError("trace_dynamics: feature out of range");

    DynamicsTrace trace;
    trace.feature = feature;
    GenerateOptions opt;
    opt.config = ctx.gen;
    opt.site = site;
    opt.capture = true;

    for (const EvalCondition& cond : conditions) {
        std::vector<std::vector<double>> per_step(static_cast<size_t>(horizon));
        for (const DatasetRecord& ex : dataset) {
            const std::vector<int> prompt =
                ctx.vocab->encode(render_prompt(cond.prompt_template, ex.question));
            const Generation gen = generate(*ctx.model, prompt, opt);
            const int steps = std::min<int>(horizon, int(gen.site_stream.size()));
            for (int t = 0; t < steps; ++t) {
                const std::vector<float> z =
                    encode(*ctx.sae, std::span<const float>(gen.site_stream[size_t(t)]));
                per_step[size_t(t)].push_back(double(z[size_t(feature)]));
            }
        }
        std::vector<StepStat> series;
        for (int t = 0; t < horizon; ++t) {
            const auto& xs = per_step[size_t(t)];
            if (xs.empty()) continue;
            StepStat st;
            st.step = t + 1;
            st.n = int(xs.size());
            double sum = 0.0;
            for (double x : xs) sum += x;
            st.mean = sum / double(xs.size());
            double ss = 0.0;
            for (double x : xs) ss += (x - st.mean) * (x - st.mean);
            st.std_dev = xs.size() > 1 ? std::sqrt(ss / double(xs.size() - 1)) : 0.0;
            series.push_back(st);
        }
        trace.conditions.push_back(cond.label);
        trace.series.push_back(std::move(series));
    }
    return trace;
}

struct TimingRow {
    int step = 0;
    double accuracy = 0.0;
    double token_mean = 0.0;
    int n_steered = 0;  // examples whose generation reached the steered step
    int n_total = 0;
};

// One steered evaluation per singleton step window. Examples that terminate
// before the window run unsteered and are counted in n_total only.
inline std::vector<TimingRow> timing_sweep(const EvalContext& ctx,
                                           const std::vector<DatasetRecord>& dataset,
                                           const SteeringSpec& spec_template,
                                           const std::string& prompt_template,
                                           const std::vector<int>& steps) {
    if (!ctx.model || !ctx.sae || !ctx.vocab) throw DataError("timing_sweep: missing inputs");
    if (steps.empty()) throw DataError("timing_sweep: no steps");
    if (dataset.empty()) throw DataError("timing_sweep: empty dataset");

    std::vector<TimingRow> rows;
    for (int step : steps) {
        if (step < 1) throw DataError("timing_sweep: steps must be >= 1");
        SteeringSpec spec = spec_template;
        spec.steps = {step};
        TimingRow row;
        row.step = step;
        row.n_total = int(dataset.size());
        int correct = 0;
        double tokens = 0.0;
        for (const DatasetRecord& ex : dataset) {
            const std::vector<int> prompt =
                ctx.vocab->encode(render_prompt(prompt_template, ex.question));
            const Generation gen = steered_generate(*ctx.model, *ctx.sae, spec, prompt, ctx.gen);
            if (ctx.scorer.correct(ctx.vocab->decode(gen.generated), ex.gold_answer)) ++correct;
            tokens += double(gen.generated.size());
            if (int(gen.generated.size()) >= step) ++row.n_steered;
        }
        row.accuracy = double(correct) / double(dataset.size());
        row.token_mean = tokens / double(dataset.size());
        rows.push_back(row);
    }
    return rows;
}

struct AblationReport {
    int target_feature = -1;
    double baseline_accuracy = 0.0;  // unsteered
    double target_accuracy = 0.0;    // target feature steered
    struct Run {
        int feature = -1;
        double accuracy = 0.0;
    };
    std::vector<Run> random_runs;
    double random_mean = 0.0;
    double random_std = 0.0;
    bool with_replacement = false;
};

// Steers the target feature, then n_runs random features drawn from those
// with nonzero raw calibration scale (target excluded), under the same spec.
inline AblationReport random_ablation(const EvalContext& ctx,
                                      const std::vector<DatasetRecord>& dataset,
                                      const SteeringSpec& spec_template,
                                      const std::string& prompt_template, int n_runs,
                                      uint64_t seed) {
    if (!ctx.model || !ctx.sae || !ctx.vocab) throw DataError("random_ablation: missing inputs");
    if (n_runs < 1) throw DataError("random_ablation: n_runs must be >= 1");
    if (spec_template.features.size() != 1)
        throw DataError("random_ablation: spec must steer exactly one target feature");
    const int target = spec_template.features.front();

    std::vector<int> eligible;
    for (int k = 0; k < int(spec_template.scales.raw.size()); ++k)
        if (k != target && spec_template.scales.raw[size_t(k)] > 0.0) eligible.push_back(k);
    if (eligible.empty()) throw DataError("random_ablation: no eligible features");

    const auto accuracy_with = [&](const SteeringSpec* spec) {
        return detail::accuracy_over(*ctx.model, *ctx.sae, spec, dataset, *ctx.vocab, ctx.scorer,
                                     prompt_template, ctx.gen);
    };

    AblationReport rep;
    rep.target_feature = target;
    rep.baseline_accuracy = accuracy_with(nullptr);
    rep.target_accuracy = accuracy_with(&spec_template);

    Rng rng(seed);
    std::vector<int> picks;
    if (int(eligible.size()) >= n_runs) {
        for (size_t i : rng.sample_indices(eligible.size(), size_t(n_runs)))
            picks.push_back(eligible[i]);
    } else {
        rep.with_replacement = true;
        for (int i = 0; i < n_runs; ++i)
            picks.push_back(eligible[rng.below(uint32_t(eligible.size()))]);
    }
    double sum = 0.0;
    for (int k : picks) {
        SteeringSpec spec = spec_template;
        spec.features = {k};
        AblationReport::Run run;
        run.feature = k;
        run.accuracy = accuracy_with(&spec);
        sum += run.accuracy;
        rep.random_runs.push_back(run);
    }
    rep.random_mean = sum / double(n_runs);
    double ss = 0.0;
    for (const auto& run : rep.random_runs) {
        const double c = run.accuracy - rep.random_mean;
        ss += c * c;
    }
    rep.random_std = n_runs > 1 ? std::sqrt(ss / double(n_runs - 1)) : 0.0;
    return rep;
}

}  // namespace latlab
