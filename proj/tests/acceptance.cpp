// Standalone acceptance gate. Each criterion prints one [PASS]/[FAIL] line;
// the exit code is nonzero when any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "latlab/latlab.hpp"

namespace fs = std::filesystem;
using namespace latlab;

namespace {

int g_failures = 0;

void report(int idx, const std::string& desc, bool ok, const std::string& detail) {
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << idx << ": " << desc;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
    if (!ok) ++g_failures;
}

template <typename F>
void criterion(int idx, const std::string& desc, F body) {
    try {
        std::string detail;
        const bool ok = body(detail);
        report(idx, desc, ok, detail);
    } catch (const std::exception& e) {
        report(idx, desc, false, std::string("exception: ") + e.what());
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ModelCheckpoint random_model(int d, int n_layers, int n_heads, int vocab, int max_seq, int d_ff,
                             Rng& rng) {
    ModelCheckpoint m = ModelCheckpoint::zeros(d, n_layers, n_heads, vocab, max_seq, d_ff);
    const auto fill = [&](std::vector<float>& v, double sd) {
        for (float& x : v) x = float(rng.normal(0.0, sd));
    };
    const auto fill_mat = [&](Mat<float>& mat, double sd) { fill(mat.a, sd); };
    fill_mat(m.tok_embed, 0.5);
    fill_mat(m.pos_embed, 0.2);
    fill_mat(m.unembed, 0.5);
    for (float& g : m.lnf_g) g = float(1.0 + rng.normal(0.0, 0.05));
    fill(m.lnf_b, 0.05);
    for (BlockWeights& b : m.blocks) {
        for (float& g : b.ln1_g) g = float(1.0 + rng.normal(0.0, 0.05));
        for (float& g : b.ln2_g) g = float(1.0 + rng.normal(0.0, 0.05));
        fill(b.ln1_b, 0.05);
        fill(b.ln2_b, 0.05);
        fill_mat(b.wq, 0.3);
        fill_mat(b.wk, 0.3);
        fill_mat(b.wv, 0.3);
        fill_mat(b.wo, 0.3);
        fill(b.bq, 0.05);
        fill(b.bk, 0.05);
        fill(b.bv, 0.05);
        fill(b.bo, 0.05);
        fill_mat(b.w_in, 0.3);
        fill_mat(b.w_out, 0.3);
        fill(b.b_in, 0.05);
        fill(b.b_out, 0.05);
    }
    return m;
}

SaeParams<float> random_sae(int d, int m, SaeVariant variant, int k, Rng& rng) {
    SaeParams<float> p = init_sae<float>(d, m, variant, 1e-3, k, 1);
    for (float& x : p.w_enc.a) x = float(rng.normal(0.0, 0.5));
    for (float& x : p.w_dec.a) x = float(rng.normal(0.0, 0.5));
    for (float& x : p.b_enc) x = float(rng.normal(0.0, 0.3));
    for (float& x : p.b_dec) x = float(rng.normal(0.0, 0.3));
    return p;
}

// Exhaustive K-subset search maximizing sum |delta|, lexicographically
// smallest subset on ties. Subsets are enumerated in ascending lexicographic
// order, so a strict improvement test keeps the smallest maximizer.
std::vector<int> brute_subset(const std::vector<double>& delta, int K) {
    const int m = int(delta.size());
    std::vector<int> idx(static_cast<size_t>(K));
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<int> best;
    double best_sum = -1.0;
    while (true) {
        double s = 0.0;
        for (int i : idx) s += std::abs(delta[size_t(i)]);
        if (s > best_sum) {
            best_sum = s;
            best = idx;
        }
        int pos = K - 1;
        while (pos >= 0 && idx[size_t(pos)] == m - K + pos) --pos;
        if (pos < 0) break;
        ++idx[size_t(pos)];
        for (int j = pos + 1; j < K; ++j) idx[size_t(j)] = idx[size_t(j - 1)] + 1;
    }
    return best;
}

double pearson_ref(std::span<const double> x, std::span<const int> y) {
    const size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += double(y[i]);
    }
    mx /= double(n);
    my /= double(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = double(y[i]) - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + LATLAB_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> dir_snapshot(const fs::path& dir) {
    std::map<std::string, std::string> snap;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) snap[e.path().filename().string()] = slurp(e.path());
    return snap;
}

fs::path scratch_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("latlab_accept_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Shared mode-model context for the causal criteria.
struct FixtureLab {
    ModeModelFixture fx = make_mode_model(0);
    EvalContext ctx;
    SteeringSpec spec;

    FixtureLab() {
        ctx.model = &fx.model;
        ctx.sae = &fx.sae;
        ctx.vocab = &fx.vocab;
        ctx.scorer.delimiter = "=";
        ctx.gen.max_new_tokens = 12;
        ctx.gen.stop_token = fx.stop_token;

        spec.features = {fx.feature};
        spec.alpha = fx.threshold * 1.5;  // unit scales: alpha is the injected magnitude
        spec.steps = {1};
        spec.scales.scale.assign(size_t(fx.sae.m), 1.0);
        spec.scales.raw = spec.scales.scale;
    }
};

void criterion_1() {
    criterion(1, "SAE analytic gradients match central differences", [&](std::string& detail) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng rng(101);
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const int d = 2 + int(rng.below(7));   // <= 8
            const int m = 2 + int(rng.below(11));  // <= 12
            const bool topk = trial % 2 == 1;
            const SaeVariant variant = topk ? SaeVariant::top_k : SaeVariant::relu_l1;
            const int k = topk ? 1 + int(rng.below(uint32_t(m))) : 0;
            const double lambda = topk ? 0.0 : rng.uniform(1e-4, 1e-2);

            SaeParams<double> p = init_sae<double>(d, m, variant, lambda, k, uint64_t(trial));
            for (double& x : p.b_enc) x = rng.normal(0.0, 0.2);

            Mat<double> batch(3, d);
            // finite differences near an activation boundary measure the jump,
            // not the gradient; resample until every margin is safe
            for (int attempt = 0; attempt < 200; ++attempt) {
                for (double& x : batch.a) x = rng.normal(0.0, 1.0);
                double kink = topk_min_gap(p, batch);
                for (int r = 0; r < batch.rows; ++r)
                    for (double a : encode_pre(p, std::span<const double>(batch.row(r))))
                        kink = std::min(kink, std::abs(a));
                if (kink > 1e-3) break;
            }
            worst = std::max(worst, sae_grad_check(p, batch, 1e-5));
        }
        const double secs = seconds_since(t0);
        detail = "max rel err " + fmt(worst) + ", " + fmt(secs) + " s";
        return worst < 1e-4 && secs < 10.0;
    });
}

void criterion_2() {
    criterion(2, "SAE training recovers a low-rank subspace", [&](std::string& detail) {
        const auto t0 = std::chrono::steady_clock::now();
        const int d = 16, rank = 4, n = 512;
        Rng rng(7);
        std::vector<std::vector<double>> basis;
        while (int(basis.size()) < rank) {
            std::vector<double> v(static_cast<size_t>(d));
            for (double& x : v) x = rng.normal();
            for (const auto& u : basis) {
                double dp = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
                for (int i = 0; i < d; ++i) v[size_t(i)] -= dp * u[size_t(i)];
            }
            const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
            if (norm < 1e-6) continue;
            for (double& x : v) x /= norm;
            basis.push_back(std::move(v));
        }
        Mat<float> data(n, d);
        for (int r = 0; r < n; ++r)
            for (int j = 0; j < rank; ++j) {
                const double c = rng.normal();
                for (int i = 0; i < d; ++i)
                    data.at(r, i) += float(c * basis[size_t(j)][size_t(i)]);
            }

        SaeParams<float> sae = init_sae<float>(d, 32, SaeVariant::top_k, 0.0, 4, 7);
        const double initial = sae_loss(sae, data).recon;
        SaeTrainConfig cfg;
        cfg.epochs = 200;
        cfg.batch_size = 16;
        cfg.lr = 0.01;
        cfg.seed = 7;
        const SaeTrainReport rep = train_sae(sae, data, cfg);
        const double best =
            *std::min_element(rep.epoch_recon.begin(), rep.epoch_recon.end());
        const double secs = seconds_since(t0);
        detail = "initial " + fmt(initial) + ", best " + fmt(best) + ", ratio " +
                 fmt(best / initial) + ", " + fmt(secs) + " s";
        return best < 1e-3 * initial && secs < 60.0;
    });
}

void criterion_3() {
    criterion(3, "differential selection matches exhaustive subset search", [&](std::string& detail) {
        Rng rng(303);
        int trials = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const int m = 1 + int(rng.below(10));
            const int K = 1 + int(rng.below(uint32_t(m)));
            // half-integer grid keeps sums exact and makes ties common
            std::vector<double> mu_a(static_cast<size_t>(m)), mu_b(static_cast<size_t>(m));
            for (double& v : mu_a) v = 0.5 * double(rng.below(9)) - 2.0;
            for (double& v : mu_b) v = 0.5 * double(rng.below(9)) - 2.0;
            const DifferentialReport rep = differential_select(mu_a, mu_b, K);
            std::vector<int> got = rep.selected;
            std::sort(got.begin(), got.end());
            if (got != brute_subset(rep.delta, K)) {
                detail = "mismatch at trial " + std::to_string(trial);
                return false;
            }
            ++trials;
        }
        detail = std::to_string(trials) + " trials exact";
        return true;
    });
}

void criterion_4() {
    criterion(4, "planted features recovered exactly across seeds", [&](std::string& detail) {
        const std::vector<int> planted = {5, 17, 29};
        const std::vector<double> effects = {10.0, -10.0, 10.0};  // effect/noise ratio 10
        int ok_seeds = 0;
        for (uint64_t seed = 0; seed < 20; ++seed) {
            const PlantedCorpus pc = make_planted_corpus(48, 200, planted, effects, 1.0, seed);
            const DifferentialReport rep =
                discover_from_aggregates(pc.corpus, pc.cond_a, pc.cond_b, int(planted.size()));
            std::vector<int> got = rep.selected;
            std::sort(got.begin(), got.end());
            if (got == planted) ++ok_seeds;
        }
        detail = std::to_string(ok_seeds) + "/20 seeds exact";
        return ok_seeds == 20;  // precision = recall = 1.0 everywhere
    });
}

void criterion_5() {
    criterion(5, "alpha = 0 steering is bit-identical to no steering", [&](std::string& detail) {
        Rng rng(505);
        const int vocab = 24;
        const ModelCheckpoint model = random_model(16, 2, 2, vocab, 24, 20, rng);
        const SaeParams<float> sae = random_sae(16, 12, SaeVariant::relu_l1, 0, rng);

        for (int trial = 0; trial < 100; ++trial) {
            SteeringSpec spec;
            spec.site.layer = int(rng.below(2));
            spec.features = {int(rng.below(12))};
            spec.alpha = 0.0;
            spec.steps = {1, 2, 3};
            spec.scales.scale.assign(12, 1.0);
            spec.scales.raw = spec.scales.scale;

            std::vector<int> prompt(1 + rng.below(8));
            for (int& t : prompt) t = int(rng.below(uint32_t(vocab)));

            GenerationConfig cfg;
            cfg.max_new_tokens = 8;
            GenerateOptions opt;
            opt.config = cfg;
            opt.site = spec.site;
            opt.capture = true;

            const Generation plain = generate(model, prompt, opt);
            const Generation steered = steered_generate(model, sae, spec, prompt, cfg, true);
            if (plain.generated != steered.generated) {
                detail = "completions diverged at trial " + std::to_string(trial);
                return false;
            }
            if (plain.site_stream.size() != steered.site_stream.size()) {
                detail = "stream lengths diverged at trial " + std::to_string(trial);
                return false;
            }
            for (size_t s = 0; s < plain.site_stream.size(); ++s)
                if (std::memcmp(plain.site_stream[s].data(), steered.site_stream[s].data(),
                                plain.site_stream[s].size() * sizeof(float)) != 0) {
                    detail = "activations diverged at trial " + std::to_string(trial);
                    return false;
                }
        }
        detail = "100 prompts bit-identical";
        return true;
    });
}

void criterion_6() {
    criterion(6, "steered residual delta equals alpha * scale * decoder column", [&](std::string& detail) {
        Rng rng(606);
        double worst = 0.0;
        int checked = 0;
        while (checked < 100) {
            const int d = 2 + int(rng.below(10));
            const int m = 2 + int(rng.below(14));
            const bool topk = checked % 2 == 1;
            const int k = topk ? 1 + int(rng.below(uint32_t(m))) : 0;
            SaeParams<float> sae =
                random_sae(d, m, topk ? SaeVariant::top_k : SaeVariant::relu_l1, k, rng);

            std::vector<float> h(static_cast<size_t>(d));
            for (float& x : h) x = float(rng.normal());
            const std::vector<float> pre = encode_pre(sae, std::span<const float>(h));

            // the closed form needs an already-active feature so the positive
            // nudge cannot change the activation mask
            int target = -1;
            if (topk) {
                for (int j : top_k_indices(std::span<const float>(pre), sae.k))
                    if (pre[size_t(j)] > 0.05f) target = j;
            } else {
                for (int j = 0; j < m; ++j)
                    if (pre[size_t(j)] > 0.05f) target = j;
            }
            if (target < 0) continue;

            SteeringSpec spec;
            spec.features = {target};
            spec.alpha = rng.uniform(0.1, 2.5);
            spec.steps = {1};
            spec.scales.scale.assign(size_t(m), 1.0);
            spec.scales.scale[size_t(target)] = rng.uniform(0.5, 2.0);
            spec.scales.raw = spec.scales.scale;

            const std::vector<float> out = steer_vector(h, spec, sae);
            const double gain = spec.alpha * spec.scales.scale[size_t(target)];
            for (int i = 0; i < d; ++i) {
                const double expect = double(h[size_t(i)]) + gain * double(sae.w_dec.at(i, target));
                worst = std::max(worst, std::abs(double(out[size_t(i)]) - expect));
            }
            ++checked;
        }
        detail = "max abs err " + fmt(worst) + " over 100 instances";
        return worst < 1e-5;
    });
}

void criterion_7() {
    criterion(7, "steering the wired feature causally flips the mode", [&](std::string& detail) {
        FixtureLab lab;
        const std::vector<DatasetRecord> data = make_mode_dataset(200, 11);

        int flips = 0;
        for (const DatasetRecord& ex : data) {
            const std::vector<int> prompt =
                lab.fx.vocab.encode(render_prompt(lab.fx.direct_template, ex.question));
            const Generation gen =
                steered_generate(lab.fx.model, lab.fx.sae, lab.spec, prompt, lab.ctx.gen);
            if (gen.generated.size() > 2) ++flips;  // short mode always stops after two tokens
        }
        const double flip_rate = double(flips) / double(data.size());

        const AblationReport rep =
            random_ablation(lab.ctx, data, lab.spec, lab.fx.direct_template, 10, 3);
        const double gain = rep.target_accuracy - rep.baseline_accuracy;
        const double control = std::abs(rep.random_mean - rep.baseline_accuracy);

        detail = "flip rate " + fmt(flip_rate) + ", accuracy " + fmt(rep.baseline_accuracy) +
                 " -> " + fmt(rep.target_accuracy) + ", random control delta " + fmt(control);
        return flip_rate >= 0.95 && gain >= 0.30 && control < 0.05;
    });
}

void criterion_8() {
    criterion(8, "earlier interventions dominate later ones", [&](std::string& detail) {
        FixtureLab lab;
        const std::vector<DatasetRecord> data = make_mode_dataset(200, 11);
        const std::vector<TimingRow> rows =
            timing_sweep(lab.ctx, data, lab.spec, lab.fx.direct_template, {1, 4, 8});
        detail = "accuracy " + fmt(rows[0].accuracy) + " / " + fmt(rows[1].accuracy) + " / " +
                 fmt(rows[2].accuracy) + " at steps 1/4/8";
        return rows[0].accuracy >= rows[1].accuracy && rows[1].accuracy >= rows[2].accuracy &&
               rows[0].accuracy > rows[2].accuracy;
    });
}

void criterion_9() {
    criterion(9, "wired feature activates early under the long-mode prompt", [&](std::string& detail) {
        FixtureLab lab;
        const std::vector<DatasetRecord> data = make_mode_dataset(50, 13);
        const std::vector<EvalCondition> conds = {
            {"cot", lab.fx.cot_template, nullptr},
            {"direct", lab.fx.direct_template, nullptr},
        };
        const DynamicsTrace trace =
            trace_dynamics(lab.ctx, data, conds, lab.fx.feature, 10, HookSite{0});
        const std::vector<StepStat>& cot = trace.series[0];
        const std::vector<StepStat>& direct = trace.series[1];
        if (cot.empty() || direct.empty() || cot.front().step != 1 || direct.front().step != 1 ||
            cot.back().step != 10) {
            detail = "unexpected trace shape";
            return false;
        }
        detail = "step-1 cot " + fmt(cot.front().mean) + " vs direct " + fmt(direct.front().mean) +
                 ", step-10 cot " + fmt(cot.back().mean);
        return cot.front().mean > direct.front().mean && cot.front().mean > cot.back().mean;
    });
}

void criterion_10() {
    criterion(10, "statistics match independent oracles", [&](std::string& detail) {
        Rng rng(1010);
        double worst_r = 0.0;
        for (int trial = 0; trial < 1000; ++trial) {
            const int n = 3 + int(rng.below(40));
            std::vector<double> x(static_cast<size_t>(n));
            std::vector<int> y(static_cast<size_t>(n));
            for (double& v : x) v = rng.normal();
            for (int& v : y) v = int(rng.below(2));
            y[0] = 0;
            y[1] = 1;  // both classes present
            const CorrelationReport rep = point_biserial(x, y);
            worst_r = std::max(worst_r, std::abs(rep.r - pearson_ref(x, y)));
        }

        const double q1 = student_t_quantile(0.975, 1.0);
        const double q10 = student_t_quantile(0.975, 10.0);
        const double q100 = student_t_quantile(0.975, 100.0);
        const double worst_q = std::max({std::abs(q1 - 12.70620474), std::abs(q10 - 2.228138852),
                                         std::abs(q100 - 1.983971519)});

        FixtureLab lab;
        const std::vector<DatasetRecord> data = make_mode_dataset(40, 17);
        GenerateOptions opt;
        opt.config = lab.ctx.gen;
        opt.capture = true;
        std::vector<double> stat;
        std::vector<int> labels;
        for (int c = 0; c < 2; ++c) {
            const std::string& tmpl = c == 0 ? lab.fx.cot_template : lab.fx.direct_template;
            for (const DatasetRecord& ex : data) {
                const std::vector<int> prompt =
                    lab.fx.vocab.encode(render_prompt(tmpl, ex.question));
                const Generation gen = generate(lab.fx.model, prompt, opt);
                std::vector<float> series;
                for (const auto& h : gen.site_stream)
                    series.push_back(
                        encode(lab.fx.sae, std::span<const float>(h))[size_t(lab.fx.feature)]);
                stat.push_back(feature_statistic(series, 20));
                labels.push_back(c == 0 ? 1 : 0);
            }
        }
        const CorrelationReport mode = point_biserial(stat, labels);

        detail = "r err " + fmt(worst_r) + ", quantile err " + fmt(worst_q) + ", fixture r " +
                 fmt(mode.r) + " p " + fmt(mode.p);
        return worst_r < 1e-12 && worst_q < 1e-6 && mode.r > 0.0 && mode.p < 0.05;
    });
}

void criterion_11() {
    criterion(11, "identical config and seed reproduce byte-identical outputs", [&](std::string& detail) {
        const fs::path dir = scratch_dir("determinism");
        const std::string cfg = " --config \"" + (dir / "config.json").string() + "\"";
        const auto chain = [&]() {
            if (run_cli("make-fixtures --out \"" + dir.string() + "\" --n-train 16 --n-eval 12") != 0)
                return false;
            for (const char* sub :
                 {"discover", "train-sae", "validate", "eval", "trace", "timing", "ablate", "stats"})
                if (run_cli(std::string(sub) + cfg) != 0) return false;
            return true;
        };

        if (!chain()) {
            detail = "first pipeline pass failed";
            return false;
        }
        const std::map<std::string, std::string> first = dir_snapshot(dir);
        if (!chain()) {
            detail = "second pipeline pass failed";
            return false;
        }
        const std::map<std::string, std::string> second = dir_snapshot(dir);

        if (first.size() != second.size()) {
            detail = "output file set changed";
            return false;
        }
        for (const auto& [name, bytes] : first) {
            const auto it = second.find(name);
            if (it == second.end() || it->second != bytes) {
                detail = name + " is not byte-identical";
                return false;
            }
        }
        detail = std::to_string(first.size()) + " files byte-identical across reruns";
        return true;
    });
}

void criterion_12() {
    criterion(12, "containers round-trip bit-exactly and reject corruption", [&](std::string& detail) {
        const fs::path dir = scratch_dir("containers");
        Rng rng(1212);

        const ModelCheckpoint model = random_model(12, 2, 2, 17, 16, 10, rng);
        save_checkpoint(dir / "m1.bin", model);
        save_checkpoint(dir / "m2.bin", load_checkpoint(dir / "m1.bin"));

        const SaeParams<float> sae = random_sae(12, 20, SaeVariant::top_k, 5, rng);
        save_sae(dir / "s1.bin", sae);
        save_sae(dir / "s2.bin", load_sae(dir / "s1.bin"));

        ActivationDump dump;
        dump.width = 6;
        for (uint32_t i = 0; i < 9; ++i) {
            ActivationDump::Rec rec;
            rec.example_hash = i * 2654435761u;
            rec.condition = i % 2;
            rec.layer = i % 3;
            rec.step = i + 1;
            rec.values.resize(6);
            for (float& v : rec.values) v = float(rng.normal());
            dump.records.push_back(std::move(rec));
        }
        save_dump(dir / "d1.bin", dump);
        save_dump(dir / "d2.bin", load_dump(dir / "d1.bin"));

        for (const char* pair : {"m", "s", "d"})
            if (slurp(dir / (std::string(pair) + "1.bin")) !=
                slurp(dir / (std::string(pair) + "2.bin"))) {
                detail = std::string(pair) + "1.bin did not round-trip bit-exactly";
                return false;
            }

        const auto rejects = [&](const fs::path& p, auto loader) {
            try {
                loader(p);
                return false;
            } catch (const std::exception&) {
                return true;
            }
        };
        const auto truncated = [&](const fs::path& src) {
            const std::string bytes = slurp(src);
            const fs::path dst = dir / ("trunc_" + src.filename().string());
            std::ofstream out(dst, std::ios::binary);
            out.write(bytes.data(), std::streamsize(bytes.size() - 5));
            return dst;
        };
        const auto bad_magic = [&](const fs::path& src) {
            std::string bytes = slurp(src);
            bytes[0] = 'X';
            const fs::path dst = dir / ("magic_" + src.filename().string());
            std::ofstream out(dst, std::ios::binary);
            out.write(bytes.data(), std::streamsize(bytes.size()));
            return dst;
        };
        const auto load_m = [](const fs::path& p) { load_checkpoint(p); };
        const auto load_s = [](const fs::path& p) { load_sae(p); };
        const auto load_d = [](const fs::path& p) { load_dump(p); };

        bool ok = true;
        ok = ok && rejects(truncated(dir / "m1.bin"), load_m);
        ok = ok && rejects(truncated(dir / "s1.bin"), load_s);
        ok = ok && rejects(truncated(dir / "d1.bin"), load_d);
        ok = ok && rejects(bad_magic(dir / "m1.bin"), load_m);
        ok = ok && rejects(bad_magic(dir / "s1.bin"), load_s);
        ok = ok && rejects(bad_magic(dir / "d1.bin"), load_d);
        // container kinds are not interchangeable
        ok = ok && rejects(dir / "m1.bin", load_s);
        ok = ok && rejects(dir / "s1.bin", load_d);
        ok = ok && rejects(dir / "d1.bin", load_m);

        detail = ok ? "3 kinds round-trip, 9 corruption cases rejected"
                    : "a corrupted or mismatched file loaded successfully";
        return ok;
    });
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    criterion_12();

    if (g_failures == 0) {
        std::cout << "all 12 criteria passed" << std::endl;
        return 0;
    }
    std::cout << g_failures << " criteria failed" << std::endl;
    return 1;
}
