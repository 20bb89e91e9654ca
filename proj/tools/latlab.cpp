// Pipeline driver: fixture generation, feature discovery, steering
// validation, and the analysis/statistics table emitters.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "latlab/latlab.hpp"

namespace fs = std::filesystem;
using namespace latlab;

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::string> model, sae, vocab, dataset, eval_dataset, out;
    std::optional<uint64_t> seed;
    std::optional<double> alpha;
    std::optional<int> K, layer, feature;
    std::optional<std::string> aggregation;
    int threads = 1;
};

json load_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path.string());
    try {
        json j;
        in >> j;
        if (!j.is_object()) throw DataError("config root must be a JSON object: " + path.string());
        return j;
    } catch (const json::exception& e) {
        throw DataError("malformed config " + path.string() + ": " + e.what());
    }
}

// Effective config: file values with command-line overrides applied on top.
struct Ctx {
    json cfg = json::object();
    fs::path cfg_dir = ".";
    fs::path out;

    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : cfg_dir / path;
    }

    std::string need_str(const std::string& key) const {
        if (!cfg.contains(key) || !cfg[key].is_string())
            throw DataError("config is missing required field \"" + key + "\"");
        return cfg[key].get<std::string>();
    }

    fs::path need_path(const std::string& key) const {
        const fs::path p = resolve(need_str(key));
        if (!fs::exists(p))
            throw DataError("config field \"" + key + "\" points to a missing file: " + p.string());
        return p;
    }

    fs::path out_file(const std::string& name) const { return out / name; }

    uint64_t seed() const { return cfg.value("seed", uint64_t(0)); }

    HookSite site() const {
        HookSite s;
        if (cfg.contains("site")) s.layer = cfg["site"].value("layer", 0);
        return s;
    }

    GenerationConfig gen(const Vocab& vocab) const {
        GenerationConfig g;
        g.seed = seed();
        if (!cfg.contains("gen")) return g;
        const json& j = cfg["gen"];
        g.max_new_tokens = j.value("max_new_tokens", g.max_new_tokens);
        const std::string sampling = j.value("sampling", std::string("greedy"));
        if (sampling == "greedy") {
            g.sampling = Sampling::greedy;
        } else if (sampling == "temperature") {
            g.sampling = Sampling::temperature;
            g.temperature = j.value("temperature", 1.0);
        } else {
            throw DataError("unknown sampling mode \"" + sampling + "\"");
        }
        if (j.contains("stop")) {
            const std::string stop = j["stop"].get<std::string>();
            if (!vocab.contains(stop)) throw DataError("stop token \"" + stop + "\" not in vocab");
            g.stop_token = vocab.id(stop);
        }
        return g;
    }

    ConditionPrompt condition(const std::string& which) const {
        if (!cfg.contains("conditions") || !cfg["conditions"].contains(which))
            throw DataError("config is missing conditions." + which);
        const json& j = cfg["conditions"][which];
        ConditionPrompt c;
        c.label = j.value("label", which);
        c.question_template = j.value("template", std::string());
        if (c.question_template.empty())
            throw DataError("conditions." + which + " has no prompt template");
        return c;
    }

    Scorer scorer() const {
        Scorer s;
        if (cfg.contains("scorer")) s.delimiter = cfg["scorer"].value("delimiter", s.delimiter);
        return s;
    }
};

Ctx make_ctx(const Overrides& ov) {
    Ctx ctx;
    if (!ov.config_path.empty()) {
        const fs::path p(ov.config_path);
        ctx.cfg = load_config_file(p);
        ctx.cfg_dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    }
    const auto set_str = [&](const char* key, const std::optional<std::string>& v) {
        if (v) ctx.cfg[key] = *v;
    };
    set_str("model", ov.model);
    set_str("sae", ov.sae);
    set_str("vocab", ov.vocab);
    set_str("dataset", ov.dataset);
    set_str("eval_dataset", ov.eval_dataset);
    if (ov.seed) ctx.cfg["seed"] = *ov.seed;
    if (ov.alpha) ctx.cfg["alpha"] = *ov.alpha;
    if (ov.K) ctx.cfg["K"] = *ov.K;
    if (ov.feature) ctx.cfg["feature"] = *ov.feature;
    if (ov.layer) ctx.cfg["site"] = json{{"layer", *ov.layer}};
    if (ov.aggregation) ctx.cfg["aggregation"] = *ov.aggregation;
    if (ov.threads < 1) throw UsageError("--threads must be >= 1");

    std::string out;
    if (ov.out) {
        out = *ov.out;
        ctx.out = out;  // flag paths are relative to the working directory
    } else if (ctx.cfg.contains("out")) {
        out = ctx.cfg["out"].get<std::string>();
        ctx.out = ctx.resolve(out);
    } else if (const char* env = std::getenv("LATLAB_OUT")) {
        out = env;
        ctx.out = out;
    } else {
        out = "out";
        ctx.out = out;
    }
    ctx.cfg["out"] = out;
    ctx.out = ctx.out.lexically_normal();
    fs::create_directories(ctx.out);
    return ctx;
}

struct LoadedWorld {
    ModelCheckpoint model;
    SaeParams<float> sae;
    Vocab vocab;
};

LoadedWorld load_world(const Ctx& ctx, RunManifest& man) {
    LoadedWorld w;
    const fs::path model_p = ctx.need_path("model");
    const fs::path sae_p = ctx.need_path("sae");
    const fs::path vocab_p = ctx.need_path("vocab");
    man.input("model", model_p);
    man.input("sae", sae_p);
    man.input("vocab", vocab_p);
    w.model = load_checkpoint(model_p);
    w.sae = load_sae(sae_p);
    w.vocab = Vocab::from_file(vocab_p);
    if (w.sae.d != w.model.d_model) throw DataError("SAE width does not match model d_model");
    if (w.model.vocab_size != w.vocab.size())
        throw DataError("vocab size does not match model checkpoint");
    return w;
}

std::vector<DatasetRecord> load_data(const Ctx& ctx, const std::string& key, RunManifest& man) {
    const fs::path p = ctx.need_path(key);
    man.input(key, p);
    return load_dataset(p);
}

// Evaluation subcommands read the held-out set when one is configured.
std::vector<DatasetRecord> load_eval_data(const Ctx& ctx, RunManifest& man) {
    return load_data(ctx, ctx.cfg.contains("eval_dataset") ? "eval_dataset" : "dataset", man);
}

DifferentialReport load_report_input(const Ctx& ctx, RunManifest& man) {
    const fs::path p = ctx.cfg.contains("report") ? ctx.need_path("report")
                                                  : ctx.out_file("report.json");
    if (!fs::exists(p))
        throw DataError("differential report not found at " + p.string() + " (run discover first)");
    man.input("report", p);
    return load_report(p);
}

ScaleTable load_scales(const Ctx& ctx, const SaeParams<float>& sae, RunManifest& man) {
    const fs::path p = ctx.cfg.contains("calibration") ? ctx.need_path("calibration")
                                                       : ctx.out_file("dump.bin");
    if (!fs::exists(p))
        throw DataError("calibration dump not found at " + p.string() + " (run discover first)");
    man.input("calibration", p);
    return build_scale_table(load_dump(p), sae, file_hash_hex(p));
}

SteeringSpec spec_from(const Ctx& ctx, const SaeParams<float>& sae, std::vector<int> features,
                       RunManifest& man) {
    SteeringSpec spec;
    spec.site = ctx.site();
    spec.features = std::move(features);
    spec.alpha = ctx.cfg.value("alpha", 15.0);
    if (ctx.cfg.contains("step_window"))
        spec.steps = ctx.cfg["step_window"].get<std::vector<int>>();
    spec.topk_exempt_steered = ctx.cfg.value("topk_exempt_steered", false);
    spec.scales = load_scales(ctx, sae, man);
    spec.sae_id = file_hash_hex(ctx.need_path("sae"));
    return spec;
}

std::vector<int> pick_features(const Ctx& ctx, RunManifest& man, int want = -1) {
    if (ctx.cfg.contains("features"))
        return ctx.cfg["features"].get<std::vector<int>>();
    if (ctx.cfg.contains("feature")) return {ctx.cfg["feature"].get<int>()};
    DifferentialReport rep = load_report_input(ctx, man);
    if (want > 0 && want < int(rep.selected.size()))
        rep.selected.resize(size_t(want));
    return rep.selected;
}

void write_manifest(const Ctx& ctx, RunManifest& man, const std::string& name) {
    man.write(ctx.out_file(name));
    std::cout << "wrote " << ctx.out_file(name).string() << "\n";
}

int cmd_make_fixtures(const Overrides& ov, int n_train, int n_eval) {
    Ctx ctx = make_ctx(ov);
    const uint64_t seed = ctx.cfg.value("seed", uint64_t(0));
    ModeModelFixture fx = make_mode_model(seed);

    save_checkpoint(ctx.out_file("model.bin"), fx.model);
    save_sae(ctx.out_file("sae.bin"), fx.sae);
    fx.vocab.save(ctx.out_file("vocab.txt"));
    save_dataset(ctx.out_file("train.jsonl"), make_mode_dataset(n_train, seed + 1));
    save_dataset(ctx.out_file("eval.jsonl"), make_mode_dataset(n_eval, seed + 2));

    json fixture;
    fixture["feature"] = fx.feature;
    fixture["threshold"] = fx.threshold;
    fixture["direct_template"] = fx.direct_template;
    fixture["cot_template"] = fx.cot_template;
    fixture["construction"] = fx.construction;
    write_text_atomic(ctx.out_file("fixture.json"), fixture.dump(2) + "\n");

    json cfg;
    cfg["model"] = "model.bin";
    cfg["sae"] = "sae.bin";
    cfg["vocab"] = "vocab.txt";
    cfg["dataset"] = "train.jsonl";
    cfg["eval_dataset"] = "eval.jsonl";
    cfg["out"] = ".";
    cfg["seed"] = seed;
    cfg["site"] = json{{"layer", 0}};
    cfg["aggregation"] = "first_step";
    cfg["K"] = 1;
    cfg["alpha"] = 20.0;
    cfg["step_window"] = json::array({1});
    cfg["timing_steps"] = json::array({1, 4, 8});
    cfg["n_runs"] = 10;
    cfg["stat_window"] = 20;
    cfg["conditions"] = json{{"a", json{{"label", "cot"}, {"template", fx.cot_template}}},
                             {"b", json{{"label", "direct"}, {"template", fx.direct_template}}}};
    cfg["gen"] = json{{"max_new_tokens", 12}, {"sampling", "greedy"}, {"stop", "."}};
    cfg["train"] = json{{"m", 64},       {"variant", "top_k"}, {"k", 8},
                        {"lambda", 0.0}, {"epochs", 8},        {"batch_size", 16},
                        {"lr", 0.001}};
    write_text_atomic(ctx.out_file("config.json"), cfg.dump(2) + "\n");

    RunManifest man("make-fixtures", ctx.cfg);
    for (const char* f : {"model.bin", "sae.bin", "vocab.txt", "train.jsonl", "eval.jsonl",
                          "fixture.json", "config.json"})
        man.output(f, ctx.out_file(f));
    write_manifest(ctx, man, "make_fixtures_manifest.json");
    return 0;
}

int cmd_discover(const Overrides& ov) {
    Ctx ctx = make_ctx(ov);
    RunManifest man("discover", ctx.cfg);
    LoadedWorld w = load_world(ctx, man);
    const std::vector<DatasetRecord> data = load_data(ctx, "dataset", man);

    DiscoveryConfig dc;
    dc.kind = aggregation_from(ctx.cfg.value("aggregation", std::string("first_step")));
    dc.K = ctx.cfg.value("K", 1);
    dc.site = ctx.site();
    dc.gen = ctx.gen(w.vocab);

    const DiscoveryResult res =
        discover(w.model, w.sae, data, ctx.condition("a"), ctx.condition("b"), w.vocab, dc);
    save_dump(ctx.out_file("dump.bin"), res.dump);
    save_report(ctx.out_file("report.json"), ctx.out_file("delta.f32"), res.report);
    man.output("dump", ctx.out_file("dump.bin"));
    man.output("report", ctx.out_file("report.json"));
    man.output("delta", ctx.out_file("delta.f32"));
    write_manifest(ctx, man, "discover_manifest.json");

    std::cout << "selected features:";
    for (int k : res.report.selected) std::cout << ' ' << k;
    std::cout << "\n";
    return 0;
}

int cmd_train_sae(const Overrides& ov) {
    Ctx ctx = make_ctx(ov);
    RunManifest man("train-sae", ctx.cfg);
    const fs::path corpus_p = ctx.cfg.contains("corpus") ? ctx.need_path("corpus")
                                                         : ctx.out_file("dump.bin");
    if (!fs::exists(corpus_p))
        throw DataError("training corpus not found at " + corpus_p.string());
    man.input("corpus", corpus_p);
    const ActivationDump dump = load_dump(corpus_p);
    if (dump.records.empty()) throw DataError("training corpus is empty");
    const Mat<float> rows = dump_to_mat(dump);

    const json tj = ctx.cfg.value("train", json::object());
    const int m = tj.value("m", 8 * dump.width);
    const SaeVariant variant = sae_variant_from(tj.value("variant", std::string("top_k")));
    const int k = tj.value("k", 192);
    const double lambda = tj.value("lambda", 1e-3);
    SaeTrainConfig tc;
    tc.epochs = tj.value("epochs", 5);
    tc.batch_size = tj.value("batch_size", 16);
    tc.lr = tj.value("lr", 1e-3);
    tc.seed = ctx.seed();

    SaeParams<float> sae = init_sae<float>(dump.width, m, variant, lambda,
                                           variant == SaeVariant::top_k ? std::min(k, m) : k,
                                           tc.seed);
    const SaeTrainReport rep = train_sae(sae, rows, tc);
    save_sae(ctx.out_file("sae_trained.bin"), sae);

    json rj;
    rj["epochs"] = tc.epochs;
    rj["steps"] = rep.steps;
    rj["epoch_loss"] = rep.epoch_loss;
    rj["epoch_recon"] = rep.epoch_recon;
    rj["dead_features"] = rep.dead_features;
    write_text_atomic(ctx.out_file("train_report.json"), rj.dump(2) + "\n");

    man.output("sae_trained", ctx.out_file("sae_trained.bin"));
    man.output("train_report", ctx.out_file("train_report.json"));
    write_manifest(ctx, man, "train_sae_manifest.json");
    std::cout << "final loss " << fmt_double(rep.epoch_loss.back()) << ", dead features "
              << rep.dead_features.size() << "\n";
    return 0;
}

int cmd_validate(const Overrides& ov) {
    Ctx ctx = make_ctx(ov);
    RunManifest man("validate", ctx.cfg);
    LoadedWorld w = load_world(ctx, man);
    const std::vector<DatasetRecord> data = load_eval_data(ctx, man);
    const DifferentialReport rep = load_report_input(ctx, man);
    const SteeringSpec spec = spec_from(ctx, w.sae, {}, man);

    const std::vector<SensitivityRow> rows =
        singleton_sensitivity(w.model, w.sae, rep, data, w.vocab, ctx.scorer(), spec,
                              ctx.condition("b").question_template, ctx.gen(w.vocab));

    std::vector<std::vector<std::string>> cells;
    for (const SensitivityRow& r : rows)
        cells.push_back({fmt_int(r.feature), fmt_double(r.baseline_accuracy),
                         fmt_double(r.steered_accuracy), fmt_double(r.delta),
                         r.selected ? "1" : "0"});
    write_text_atomic(ctx.out_file("sensitivity.csv"),
                      to_csv({"feature", "baseline_accuracy", "steered_accuracy", "delta",
                              "selected"},
                             cells));
    man.output("sensitivity", ctx.out_file("sensitivity.csv"));
    write_manifest(ctx, man, "validate_manifest.json");
    return 0;
}

int cmd_eval(const Overrides& ov) {
    Ctx ctx = make_ctx(ov);
    RunManifest man("eval", ctx.cfg);
    LoadedWorld w = load_world(ctx, man);
    const std::vector<DatasetRecord> data = load_eval_data(ctx, man);
    const SteeringSpec spec = spec_from(ctx, w.sae, pick_features(ctx, man), man);
    if (spec.features.empty()) throw DataError("eval: no features to steer");

    const ConditionPrompt a = ctx.condition("a"), b = ctx.condition("b");
    EvalContext ec{&w.model, &w.sae, &w.vocab, ctx.scorer(), ctx.gen(w.vocab)};
    const std::vector<EvalCondition> conds = {
        {b.label, b.question_template, nullptr},
        {"steered_" + b.label, b.question_template, &spec},
        {a.label, a.question_template, nullptr},
        {"steered_" + a.label, a.question_template, &spec},
    };
    const std::vector<EvalOutcome> outcomes = evaluate_conditions(ec, data, conds);

    std::vector<std::vector<std::string>> cells;
    for (const EvalOutcome& o : outcomes)
        cells.push_back({o.label, fmt_double(o.accuracy), fmt_double(o.token_mean),
                         fmt_double(o.token_std), fmt_int(int(o.per_example.size()))});
    write_text_atomic(ctx.out_file("table1.csv"),
                      to_csv({"condition", "accuracy", "token_mean", "token_std", "n"}, cells));
    man.output("table1", ctx.out_file("table1.csv"));
    write_manifest(ctx, man, "eval_manifest.json");
    for (const EvalOutcome& o : outcomes)
        std::cout << o.label << ": accuracy " << fmt_double(o.accuracy) << ", tokens "
                  << fmt_double(o.token_mean) << "\n";
    return 0;
}

int cmd_trace(const Overrides& ov) {
    Ctx ctx = make_ctx(ov);
    RunManifest man("trace", ctx.cfg);
    LoadedWorld w = load_world(ctx, man);
    const std::vector<DatasetRecord> data = load_eval_data(ctx, man);
    const std::vector<int> feats = pick_features(ctx, man, 1);
    if (feats.empty()) throw DataError("trace: no feature");
    const int horizon = ctx.cfg.value("horizon", 20);

    const ConditionPrompt a = ctx.condition("a"), b = ctx.condition("b");
    EvalContext ec{&w.model, &w.sae, &w.vocab, ctx.scorer(), ctx.gen(w.vocab)};
    const DynamicsTrace trace = trace_dynamics(
        ec, data, {{a.label, a.question_template, nullptr}, {b.label, b.question_template, nullptr}},
        feats.front(), horizon, ctx.site());

    std::vector<std::vector<std::string>> cells;
    for (size_t c = 0; c < trace.conditions.size(); ++c)
        for (const StepStat& st : trace.series[c])
            cells.push_back({fmt_int(st.step), trace.conditions[c], fmt_double(st.mean),
                             fmt_double(st.std_dev)});
    write_text_atomic(ctx.out_file("dynamics.csv"),
                      to_csv({"step", "condition", "mean", "std"}, cells));
    man.output("dynamics", ctx.out_file("dynamics.csv"));
    write_manifest(ctx, man, "trace_manifest.json");
    return 0;
}

int cmd_timing(const Overrides& ov) {
    Ctx ctx = make_ctx(ov);
    RunManifest man("timing", ctx.cfg);
    LoadedWorld w = load_world(ctx, man);
    const std::vector<DatasetRecord> data = load_eval_data(ctx, man);
    const std::vector<int> feats = pick_features(ctx, man, 1);
    SteeringSpec spec = spec_from(ctx, w.sae, feats, man);
    if (spec.features.empty()) throw DataError("timing: no feature to steer");
    std::vector<int> steps = {1, 4, 8};
    if (ctx.cfg.contains("timing_steps")) steps = ctx.cfg["timing_steps"].get<std::vector<int>>();

    EvalContext ec{&w.model, &w.sae, &w.vocab, ctx.scorer(), ctx.gen(w.vocab)};
    const std::vector<TimingRow> rows =
        timing_sweep(ec, data, spec, ctx.condition("b").question_template, steps);

    std::vector<std::vector<std::string>> cells;
    for (const TimingRow& r : rows)
        cells.push_back({fmt_int(r.step), fmt_double(r.accuracy), fmt_double(r.token_mean),
                         fmt_int(r.n_steered), fmt_int(r.n_total)});
    write_text_atomic(ctx.out_file("timing.csv"),
                      to_csv({"step", "accuracy", "token_mean", "n_steered", "n_total"}, cells));
    man.output("timing", ctx.out_file("timing.csv"));
    write_manifest(ctx, man, "timing_manifest.json");
    return 0;
}

int cmd_ablate(const Overrides& ov) {
    Ctx ctx = make_ctx(ov);
    RunManifest man("ablate", ctx.cfg);
    LoadedWorld w = load_world(ctx, man);
    const std::vector<DatasetRecord> data = load_eval_data(ctx, man);
    const std::vector<int> feats = pick_features(ctx, man, 1);
    if (feats.size() != 1) throw DataError("ablate: exactly one target feature required");
    const SteeringSpec spec = spec_from(ctx, w.sae, feats, man);
    const int n_runs = ctx.cfg.value("n_runs", 10);

    EvalContext ec{&w.model, &w.sae, &w.vocab, ctx.scorer(), ctx.gen(w.vocab)};
    const AblationReport rep = random_ablation(ec, data, spec,
                                               ctx.condition("b").question_template, n_runs,
                                               ctx.seed());

    std::vector<std::vector<std::string>> cells;
    cells.push_back({"baseline", "", fmt_double(rep.baseline_accuracy)});
    cells.push_back({"target", fmt_int(rep.target_feature), fmt_double(rep.target_accuracy)});
    for (const auto& run : rep.random_runs)
        cells.push_back({"random", fmt_int(run.feature), fmt_double(run.accuracy)});
    cells.push_back({"random_mean", "", fmt_double(rep.random_mean)});
    cells.push_back({"random_std", "", fmt_double(rep.random_std)});
    write_text_atomic(ctx.out_file("ablation.csv"), to_csv({"row", "feature", "accuracy"}, cells));

    json rj;
    rj["target_feature"] = rep.target_feature;
    rj["baseline_accuracy"] = rep.baseline_accuracy;
    rj["target_accuracy"] = rep.target_accuracy;
    rj["random_mean"] = rep.random_mean;
    rj["random_std"] = rep.random_std;
    rj["n_runs"] = n_runs;
    rj["with_replacement"] = rep.with_replacement;
    write_text_atomic(ctx.out_file("ablation.json"), rj.dump(2) + "\n");
    man.output("ablation_csv", ctx.out_file("ablation.csv"));
    man.output("ablation_json", ctx.out_file("ablation.json"));
    write_manifest(ctx, man, "ablate_manifest.json");
    return 0;
}

int cmd_stats(const Overrides& ov) {
    Ctx ctx = make_ctx(ov);
    RunManifest man("stats", ctx.cfg);
    LoadedWorld w = load_world(ctx, man);
    const std::vector<DatasetRecord> data = load_eval_data(ctx, man);
    const std::vector<int> feats = pick_features(ctx, man, 1);
    if (feats.empty()) throw DataError("stats: no feature");
    const int feature = feats.front();
    const int window = ctx.cfg.value("stat_window", 20);

    const ConditionPrompt conds[2] = {ctx.condition("a"), ctx.condition("b")};
    const Scorer scorer = ctx.scorer();
    const GenerationConfig gc = ctx.gen(w.vocab);

    GenerateOptions opt;
    opt.config = gc;
    opt.site = ctx.site();
    opt.capture = true;

    // Per (example, condition): the feature statistic and the correct flag.
    std::vector<double> stat[2];
    std::vector<int> correct[2];
    for (int c = 0; c < 2; ++c) {
        for (const DatasetRecord& ex : data) {
            const std::vector<int> prompt =
                w.vocab.encode(render_prompt(conds[c].question_template, ex.question));
            const Generation gen = generate(w.model, prompt, opt);
            std::vector<float> series;
            for (const auto& h : gen.site_stream)
                series.push_back(encode(w.sae, std::span<const float>(h))[size_t(feature)]);
            stat[c].push_back(feature_statistic(series, window));
            correct[c].push_back(scorer.correct(w.vocab.decode(gen.generated), ex.gold_answer) ? 1
                                                                                               : 0);
        }
    }

    struct Target {
        std::string name;
        std::vector<double> x;
        std::vector<int> y;
    };
    std::vector<Target> targets;
    {
        Target mode;
        mode.name = "mode";
        for (int c = 0; c < 2; ++c)
            for (size_t i = 0; i < stat[c].size(); ++i) {
                mode.x.push_back(stat[c][i]);
                mode.y.push_back(c == 0 ? 1 : 0);  // condition a is the long-form mode
            }
        targets.push_back(std::move(mode));
        targets.push_back({conds[0].label + "_accuracy", stat[0], correct[0]});
        targets.push_back({conds[1].label + "_accuracy", stat[1], correct[1]});
    }

    std::vector<std::vector<std::string>> cells;
    json skipped = json::array();
    for (const Target& t : targets) {
        try {
            const CorrelationReport r = point_biserial(t.x, t.y);
            cells.push_back({t.name, fmt_double(r.r), fmt_double(r.p), fmt_int(r.n1),
                             fmt_int(r.n0), fmt_double(r.mean_a), fmt_double(r.std_a),
                             fmt_double(r.mean_b), fmt_double(r.std_b)});
        } catch (const DataError& e) {
            skipped.push_back(json{{"target", t.name}, {"reason", e.what()}});
        }
    }
    write_text_atomic(ctx.out_file("correlation.csv"),
                      to_csv({"target", "r", "p", "n1", "n0", "mean_a", "std_a", "mean_b",
                              "std_b"},
                             cells));
    man.j["feature"] = feature;
    man.j["skipped"] = skipped;
    man.output("correlation", ctx.out_file("correlation.csv"));
    write_manifest(ctx, man, "stats_manifest.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent-steering laboratory"};
    app.require_subcommand(1);

    Overrides ov;
    int n_train = 200, n_eval = 100;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", ov.config_path, "JSON config file");
        sub->add_option("--out", ov.out, "output directory (overrides config)");
        sub->add_option("--seed", ov.seed, "seed (overrides config)");
        sub->add_option("--model", ov.model, "model checkpoint path");
        sub->add_option("--sae", ov.sae, "SAE container path");
        sub->add_option("--vocab", ov.vocab, "vocab file path");
        sub->add_option("--dataset", ov.dataset, "dataset path");
        sub->add_option("--eval-dataset", ov.eval_dataset, "held-out dataset path");
        sub->add_option("--alpha", ov.alpha, "steering coefficient");
        sub->add_option("--K", ov.K, "selection size");
        sub->add_option("--feature", ov.feature, "feature index");
        sub->add_option("--layer", ov.layer, "hook site layer");
        sub->add_option("--aggregation", ov.aggregation, "first_step|mean_pool|max_pool");
        sub->add_option("--threads", ov.threads, "worker cap (execution is deterministic)");
        return sub;
    };

    CLI::App* fixtures = add_common(app.add_subcommand("make-fixtures", "write the mode-model fixture set"));
    fixtures->add_option("--n-train", n_train, "fixture training examples");
    fixtures->add_option("--n-eval", n_eval, "fixture eval examples");
    CLI::App* discover_cmd = add_common(app.add_subcommand("discover", "contrast conditions, select features"));
    CLI::App* train_cmd = add_common(app.add_subcommand("train-sae", "train an SAE on an activation dump"));
    CLI::App* validate_cmd = add_common(app.add_subcommand("validate", "singleton steering sensitivity"));
    CLI::App* eval_cmd = add_common(app.add_subcommand("eval", "four-condition accuracy table"));
    CLI::App* trace_cmd = add_common(app.add_subcommand("trace", "feature activation dynamics"));
    CLI::App* timing_cmd = add_common(app.add_subcommand("timing", "intervention-step sweep"));
    CLI::App* ablate_cmd = add_common(app.add_subcommand("ablate", "random-feature ablation"));
    CLI::App* stats_cmd = add_common(app.add_subcommand("stats", "point-biserial correlation table"));

    try {
        app.parse(argc, argv);
        if (fixtures->parsed()) return cmd_make_fixtures(ov, n_train, n_eval);
        if (discover_cmd->parsed()) return cmd_discover(ov);
        if (train_cmd->parsed()) return cmd_train_sae(ov);
        if (validate_cmd->parsed()) return cmd_validate(ov);
        if (eval_cmd->parsed()) return cmd_eval(ov);
        if (trace_cmd->parsed()) return cmd_trace(ov);
        if (timing_cmd->parsed()) return cmd_timing(ov);
        if (ablate_cmd->parsed()) return cmd_ablate(ov);
        if (stats_cmd->parsed()) return cmd_stats(ov);
        throw UsageError("no subcommand");
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
