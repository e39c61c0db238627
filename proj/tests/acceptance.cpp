// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Expected values and tolerances are pinned in code.
#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "windfuse/eval.hpp"
#include "windfuse/fusion.hpp"
#include "windfuse/ingest.hpp"
#include "windfuse/interpret.hpp"
#include "windfuse/synth.hpp"
#include "windfuse/util/rng.hpp"

namespace fs = std::filesystem;
using namespace windfuse;

namespace {

struct Checker {
    std::vector<std::string> failures;

    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    void expect_near(double got, double want, double tol, const std::string& what) {
        if (!(std::abs(got - want) <= tol)) {
            failures.push_back(what + ": got " + std::to_string(got) + ", want " +
                               std::to_string(want) + " +- " + std::to_string(tol));
        }
    }
};

std::vector<std::size_t> iota_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

// --------------------------------------------------------------------------
// 1. Metric-identity fixture from the published confusion counts.
void criterion_metrics(Checker& c) {
    const eval::ConfusionMatrix cm{493, 0, 1467, 40};
    const auto report = eval::metrics(cm);
    c.expect(report.precision_high.has_value() && *report.precision_high == 1.0,
             "precision_high must be exactly 1");
    c.expect_near(*report.recall_high, 0.9250, 0.0005, "recall_high");
    c.expect_near(*report.f1_high, 0.9610, 0.0005, "f1_high");
    c.expect_near(report.accuracy, 0.9800, 0.0005, "accuracy");
    c.expect_near(*report.macro_f1, 0.975, 0.0015, "macro_f1");
}

// --------------------------------------------------------------------------
// 2. Complementary benchmark: the fused model beats either stream alone.
void criterion_complementary(Checker& c) {
    core::RunConfig cfg;
    cfg.text.d_model = 32;
    cfg.text.n_heads = 4;
    cfg.text.n_layers = 1;
    cfg.text.epochs = 10;
    cfg.text.lr = 1e-3;
    cfg.text.batch_size = 64;
    cfg.text.max_tokens = 32;
    cfg.fusion.epochs = 300;
    cfg.fusion.lr = 1e-2;

    int fused_wins = 0;
    int text_margin_wins = 0;
    const std::array<std::uint64_t, 5> seeds{11, 22, 33, 44, 55};
    for (const auto seed : seeds) {
        synth::SynthSpec spec;
        spec.n = 10000;
        spec.seed = seed;
        spec.complementary = true;  // numeric channel carries half the signal
        spec.delta_num = 4.0;
        spec.delta_text = 0.8;
        const auto ds = synth::generate(spec);
        cfg.seed = seed * 7 + 1;
        const auto split = ingest::train_test_split(ds.size(), 0.8, seed);
        const auto rows =
            eval::compare_baselines(ds, split.train_indices, split.test_indices, cfg);
        const double rf = rows[2].accuracy;
        const double text = rows[3].accuracy;
        const double fused = rows[4].accuracy;
        std::printf("    seed %llu: rf=%.4f text=%.4f fused=%.4f\n",
                    static_cast<unsigned long long>(seed), rf, text, fused);
        if (fused >= std::max(rf, text)) ++fused_wins;
        if (fused >= text + 0.02) ++text_margin_wins;
    }
    c.expect(fused_wins >= 4, "fused >= max(rf, text) in at least 4 of 5 seeds, got " +
                                  std::to_string(fused_wins));
    c.expect(text_margin_wins >= 4,
             "fused >= text + 0.02 in at least 4 of 5 seeds, got " +
                 std::to_string(text_margin_wins));
}

// --------------------------------------------------------------------------
// 3. Forest accuracy against the analytic optimum of the generator.
double forest_holdout_accuracy(double delta, std::uint64_t seed, Checker& c) {
    synth::SynthSpec spec;
    spec.n = 4000;
    spec.seed = seed;
    spec.delta_num = delta;
    spec.delta_text = 0.0;
    spec.informative_features = {4};
    const auto ds = synth::generate(spec);
    const auto split = ingest::train_test_split(ds.size(), 0.8, seed);
    const auto imputer = ingest::fit_imputer(ds, split.train_indices);
    const auto train_set = ingest::impute(ds, split.train_indices, imputer);
    const auto stats = ingest::fit_standardizer(train_set, iota_rows(train_set.size()));
    const auto x_train = ingest::apply_standardizer(stats, train_set, iota_rows(train_set.size()));
    std::vector<int> y_train;
    for (const auto r : split.train_indices) {
        y_train.push_back(static_cast<int>(*ds.observations[r].label));
    }
    tabular::ForestParams params;  // published defaults: 100 trees, depth 12
    const auto model = tabular::fit_forest(x_train, y_train, params, seed * 31 + 7);
    c.expect(model.feature_subsample == 3, "feature subsample must default to ceil(sqrt(6)) = 3");
    std::size_t correct = 0;
    for (const auto r : split.test_indices) {
        const auto x = ingest::standardize_row(stats, ds.observations[r], imputer);
        const auto p = tabular::forest_predict_proba(model, x);
        if ((p[1] >= 0.5 ? 1 : 0) == static_cast<int>(*ds.observations[r].label)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(split.test_indices.size());
}

void criterion_forest(Checker& c) {
    synth::SynthSpec probe;
    probe.delta_num = 2.0;
    probe.delta_text = 0.0;
    probe.informative_features = {4};
    const double bayes = synth::bayes_accuracy(probe);
    c.expect_near(bayes, 0.8413447460685429, 1e-9, "analytic optimum Phi(1)");
    const double acc2 = forest_holdout_accuracy(2.0, 303, c);
    std::printf("    delta=2: acc=%.4f vs optimum %.4f\n", acc2, bayes);
    c.expect_near(acc2, bayes, 0.03, "forest accuracy vs analytic optimum");
    const double acc4 = forest_holdout_accuracy(4.0, 101, c);
    std::printf("    delta=4: acc=%.4f\n", acc4);
    c.expect(acc4 >= 0.95, "forest accuracy at 4 sigma separation >= 0.95, got " +
                               std::to_string(acc4));
}

// --------------------------------------------------------------------------
// 4. Text stream: overfit the 32-example keyword corpus; full gradient check.
void criterion_text(Checker& c) {
    util::Rng rng(77);
    std::vector<std::vector<std::string>> docs;
    std::vector<int> labels;
    const std::vector<std::string> filler{"station", "observed", "steady", "conditions",
                                          "through", "the", "evening"};
    for (int i = 0; i < 32; ++i) {
        const int label = i % 2;
        auto doc = filler;
        doc.push_back(label == 1 ? "damage" : "calm");
        if (rng.bernoulli(0.5)) doc.push_back(label == 1 ? "severe" : "quiet");
        docs.push_back(std::move(doc));
        labels.push_back(label);
    }
    const auto vocab = text::build_vocabulary(docs);
    text::EncoderConfig enc_cfg;
    enc_cfg.d_model = 32;
    enc_cfg.n_heads = 4;
    enc_cfg.n_layers = 1;
    enc_cfg.max_positions = 32;
    auto model = text::init_encoder(enc_cfg, vocab.size(), 7);
    text::TrainParams params;
    params.epochs = 200;
    params.lr = 1e-3;
    params.batch_size = 8;
    params.seed = 7;
    const auto result = text::train_encoder(model, vocab, docs, labels, params);
    bool reached = false;
    int at_epoch = -1;
    for (const auto& rec : result.curve) {
        if (rec.train_acc == 1.0) {
            reached = true;
            at_epoch = rec.epoch;
            break;
        }
    }
    std::printf("    toy corpus perfect accuracy at epoch %d\n", at_epoch);
    c.expect(reached, "encoder must reach 100% training accuracy within 200 epochs");

    // gradient check: every parameter tensor of a d=8, 1-layer model on a
    // 4-token input, at a well-conditioned random point
    enc_cfg.d_model = 8;
    enc_cfg.n_heads = 2;
    enc_cfg.max_positions = 16;
    auto small = text::init_encoder(enc_cfg, vocab.size(), 9);
    util::Rng noise(0x9c);
    small.for_each_param([&](const std::string&, Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index col = 0; col < m.cols(); ++col) {
                m(r, col) += noise.gaussian(0.0, 0.3);
            }
        }
    });
    const auto ids = text::encode_ids(small, vocab, {"damage", "severe", "calm"});
    c.expect(ids.size() == 4, "gradient-check input must be 4 tokens including CLS");

    auto grads = text::make_grads(small);
    text::encoder_loss_and_grad(small, ids, ids.size(), 1, grads);
    auto loss_at = [&](const text::TextEncoderModel& m) {
        const Eigen::Vector2d logits = text::encoder_forward(m, ids);
        const double mx = std::max(logits(0), logits(1));
        const double e0 = std::exp(logits(0) - mx);
        const double e1 = std::exp(logits(1) - mx);
        return -std::log(e1 / (e0 + e1));
    };
    std::vector<Eigen::MatrixXd*> params_list;
    small.for_each_param(
        [&](const std::string&, Eigen::MatrixXd& m) { params_list.push_back(&m); });
    std::vector<const Eigen::MatrixXd*> grad_list;
    grads.shape.for_each_param(
        [&](const std::string&, Eigen::MatrixXd& m) { grad_list.push_back(&m); });
    double worst = 0.0;
    for (std::size_t t = 0; t < params_list.size(); ++t) {
        Eigen::MatrixXd& p = *params_list[t];
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            for (Eigen::Index col = 0; col < p.cols(); ++col) {
                const double saved = p(r, col);
                const double h = 1e-5 * std::max(1.0, std::abs(saved));
                p(r, col) = saved + h;
                const double up = loss_at(small);
                p(r, col) = saved - h;
                const double down = loss_at(small);
                p(r, col) = saved;
                worst = std::max(
                    worst, oracles::rel_err((*grad_list[t])(r, col), (up - down) / (2 * h)));
            }
        }
    }
    std::printf("    worst gradient relative error %.3g\n", worst);
    c.expect(worst <= 1e-4, "encoder gradient check must be within 1e-4 relative");
}

// --------------------------------------------------------------------------
// 5. Fusion contract: frozen streams and exact meta gradients.
void criterion_fusion(Checker& c) {
    synth::SynthSpec spec;
    spec.n = 300;
    spec.seed = 5;
    spec.delta_num = 3.0;
    spec.delta_text = 0.8;
    const auto ds = synth::generate(spec);
    core::RunConfig cfg;
    cfg.seed = 5;
    cfg.rf.trees = 20;
    cfg.rf.max_depth = 6;
    cfg.text.epochs = 3;
    cfg.text.lr = 1e-3;
    cfg.text.d_model = 16;
    cfg.text.n_heads = 2;
    cfg.text.n_layers = 1;
    cfg.text.max_tokens = 32;
    cfg.fusion.epochs = 100;
    auto pipeline = fusion::train_pipeline(ds, iota_rows(ds.size()), cfg);

    const std::string forest_before = tabular::digest(pipeline.forest);
    const std::string encoder_before = text::digest(pipeline.encoder);
    std::vector<fusion::FusedVector> fused;
    std::vector<int> labels;
    for (std::size_t i = 0; i < 60; ++i) {
        const auto streams = fusion::stream_outputs(pipeline, ds.observations[i]);
        fused.push_back(fusion::fuse(streams.rf_probs, streams.text_logits));
        labels.push_back(static_cast<int>(*ds.observations[i].label));
    }
    fusion::FusionTrainParams train_params;
    train_params.epochs = 80;
    fusion::train_fusion(pipeline.meta, fused, labels, train_params);
    c.expect(tabular::digest(pipeline.forest) == forest_before,
             "forest parameters must be frozen through fusion training");
    c.expect(text::digest(pipeline.encoder) == encoder_before,
             "encoder parameters must be frozen through fusion training");

    // analytic meta gradients vs central differences
    util::Rng rng(13);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        auto g = fusion::init_meta(16, rng.bits());
        const double p0 = rng.uniform();
        const auto z = fusion::fuse({p0, 1 - p0}, {rng.gaussian(0, 2), rng.gaussian(0, 2)});
        const int label = rng.bernoulli(0.5) ? 1 : 0;
        auto grads = fusion::init_meta(16, 0);
        grads.w1.setZero();
        grads.b1.setZero();
        grads.w2.setZero();
        grads.b2.setZero();
        std::array<double, 4> d_input{};
        fusion::meta_loss_grad(g, z, label, grads, &d_input);
        const double h = 1e-6;
        auto loss_of = [&] {
            return fusion::cross_entropy(fusion::meta_forward(g, z).p_high, label);
        };
        auto sweep = [&](Eigen::MatrixXd& p, const Eigen::MatrixXd& analytic) {
            for (Eigen::Index r = 0; r < p.rows(); ++r) {
                for (Eigen::Index col = 0; col < p.cols(); ++col) {
                    const double saved = p(r, col);
                    p(r, col) = saved + h;
                    const double up = loss_of();
                    p(r, col) = saved - h;
                    const double down = loss_of();
                    p(r, col) = saved;
                    worst = std::max(worst,
                                     oracles::rel_err(analytic(r, col), (up - down) / (2 * h)));
                }
            }
        };
        sweep(g.w1, grads.w1);
        sweep(g.w2, grads.w2);
        for (Eigen::Index i = 0; i < g.b1.size(); ++i) {
            const double saved = g.b1(i);
            g.b1(i) = saved + h;
            const double up = loss_of();
            g.b1(i) = saved - h;
            const double down = loss_of();
            g.b1(i) = saved;
            worst = std::max(worst, oracles::rel_err(grads.b1(i), (up - down) / (2 * h)));
        }
        for (Eigen::Index i = 0; i < g.b2.size(); ++i) {
            const double saved = g.b2(i);
            g.b2(i) = saved + h;
            const double up = loss_of();
            g.b2(i) = saved - h;
            const double down = loss_of();
            g.b2(i) = saved;
            worst = std::max(worst, oracles::rel_err(grads.b2(i), (up - down) / (2 * h)));
        }
    }
    std::printf("    worst meta gradient relative error %.3g\n", worst);
    c.expect(worst <= 1e-6, "meta gradient check must be within 1e-6 relative");
}

// --------------------------------------------------------------------------
// 6. Interpretability: planted ablation, exact-zero sensitivity, contrast.
void criterion_interpret(Checker& c) {
    core::RunConfig cfg;
    cfg.rf.trees = 40;
    cfg.rf.max_depth = 8;
    cfg.text.epochs = 0;
    cfg.text.d_model = 16;
    cfg.text.n_heads = 2;
    cfg.text.n_layers = 1;
    cfg.text.max_tokens = 32;
    cfg.fusion.epochs = 200;
    cfg.fusion.lr = 1e-2;

    int wins = 0;
    for (int trial = 0; trial < 20; ++trial) {
        synth::SynthSpec spec;
        spec.n = 600;
        spec.seed = 1000 + static_cast<std::uint64_t>(trial);
        spec.delta_num = 3.0;
        spec.delta_text = 0.0;
        spec.informative_features = {4};
        const auto ds = synth::generate(spec);
        const auto train = iota_rows(450);
        std::vector<std::size_t> test;
        for (std::size_t i = 450; i < 600; ++i) test.push_back(i);
        cfg.seed = 2000 + static_cast<std::uint64_t>(trial);
        const auto pipeline = fusion::train_pipeline(ds, train, cfg);
        const auto correct = interpret::select_correct_high_risk(pipeline, ds, test);
        if (correct.empty()) continue;
        const auto samples = interpret::make_sample_set(pipeline, ds, correct);
        const auto report = interpret::ablate(samples);
        bool strictly_largest = true;
        for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
            if (f != 4 && report.impact[f] >= report.impact[4]) strictly_largest = false;
        }
        if (strictly_largest) ++wins;
    }
    std::printf("    planted feature strictly largest in %d of 20 trials\n", wins);
    c.expect(wins >= 19, "ablation must single out the planted feature in >= 19 of 20 trials");

    // provably ignored feature: constant in training, sensitivity exactly 0
    synth::SynthSpec spec;
    spec.n = 250;
    spec.seed = 77;
    spec.delta_num = 3.0;
    spec.delta_text = 0.0;
    auto ds = synth::generate(spec);
    for (auto& obs : ds.observations) obs.tmpf = 55.0;
    cfg.seed = 78;
    const auto pipeline = fusion::train_pipeline(ds, iota_rows(ds.size()), cfg);
    const auto correct = interpret::select_correct_high_risk(pipeline, ds, iota_rows(ds.size()));
    c.expect(!correct.empty(), "ignored-feature fixture must classify some high-risk samples");
    if (!correct.empty()) {
        const auto samples = interpret::make_sample_set(pipeline, ds, correct);
        const auto report = interpret::sensitivity_fd(samples, 1e-3);
        c.expect(report.sensitivity[0] == 0.0,
                 "sensitivity of a provably ignored feature must be exactly 0");
    }

    // constructed local-signal vs necessity disagreement
    util::Rng rng(61);
    interpret::SampleSet set;
    for (int i = 0; i < 40; ++i) {
        std::vector<double> x(core::kFeatureCount, 0.0);
        x[0] = rng.gaussian(2.0, 0.2);
        x[1] = rng.gaussian(2.0, 0.2);
        for (std::size_t f = 2; f < core::kFeatureCount; ++f) x[f] = rng.gaussian(0.0, 1.0);
        set.x_std.push_back(std::move(x));
    }
    const auto anchors = set.x_std;
    set.score = [anchors](std::size_t i, const std::vector<double>& x) {
        const double local = 0.05 * std::tanh(10.0 * (x[0] - anchors[i][0]));
        const double level = x[1] > 1.0 ? 0.4 : 0.0;
        return 0.3 + local + level;
    };
    const auto sens = interpret::sensitivity_fd(set, 1e-3);
    const auto abl = interpret::ablate(set);
    const auto contrast = interpret::contrast_report(sens, abl);
    c.expect(contrast.flagged.size() == 1 && contrast.flagged[0].first == "tmpf" &&
                 contrast.flagged[0].second == "dwpf",
             "contrast report must flag the constructed rank disagreement");
}

// --------------------------------------------------------------------------
// 7. Evaluation engine: dual-route AUC, fold balance, leakage.
void criterion_eval_engine(Checker& c) {
    util::Rng rng(29);
    double worst = 0.0;
    int instances = 0;
    while (instances < 100) {
        const std::size_t n = 2 + rng.below(199);
        std::vector<double> scores;
        std::vector<core::RiskLabel> labels;
        bool has_high = false, has_low = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores.push_back(std::round(rng.uniform() * 25.0) / 25.0);
            const bool high = rng.bernoulli(0.4);
            labels.push_back(high ? core::RiskLabel::HighRisk : core::RiskLabel::LowRisk);
            (high ? has_high : has_low) = true;
        }
        if (!has_high || !has_low) continue;
        ++instances;
        worst = std::max(worst, std::abs(eval::roc_auc(scores, labels) -
                                         oracles::trapezoid_auc(scores, labels)));
    }
    std::printf("    worst AUC two-method disagreement %.3g over 100 instances\n", worst);
    c.expect(worst < 1e-12, "Mann-Whitney and trapezoidal AUC must agree within 1e-12");

    // stratified fold balance within +-1 per class
    for (const auto& [low, high] : std::vector<std::pair<std::size_t, std::size_t>>{
             {7317, 2683}, {333, 77}, {50, 49}}) {
        core::Dataset ds;
        for (std::size_t i = 0; i < low + high; ++i) {
            core::Observation obs;
            obs.station = "T";
            for (std::size_t f = 0; f < 6; ++f) obs.feature(f) = static_cast<double>(i % 13);
            obs.label = i < low ? core::RiskLabel::LowRisk : core::RiskLabel::HighRisk;
            ds.observations.push_back(std::move(obs));
        }
        const auto spec = ingest::stratified_kfold(ds, 5, 7);
        std::array<std::array<std::size_t, 2>, 5> counts{};
        for (std::size_t i = 0; i < ds.size(); ++i) {
            counts[static_cast<std::size_t>(*spec.fold_assignments[i])]
                  [static_cast<std::size_t>(*ds.observations[i].label)]++;
        }
        const std::array<std::size_t, 2> totals{low, high};
        for (int klass = 0; klass < 2; ++klass) {
            const std::size_t base = totals[static_cast<std::size_t>(klass)] / 5;
            for (const auto& fold : counts) {
                const std::size_t got = fold[static_cast<std::size_t>(klass)];
                c.expect(got >= base && got <= base + 1,
                         "per-class fold count must stay within one of the floor");
            }
        }
    }

    // leakage: mutating a fold's test rows leaves that fold's fitted stats
    synth::SynthSpec spec;
    spec.n = 90;
    spec.seed = 21;
    spec.delta_num = 3.0;
    const auto ds = synth::generate(spec);
    core::RunConfig cfg;
    cfg.seed = 23;
    cfg.rf.trees = 10;
    cfg.rf.max_depth = 5;
    cfg.text.epochs = 2;
    cfg.text.lr = 1e-3;
    cfg.text.d_model = 16;
    cfg.text.n_heads = 2;
    cfg.text.n_layers = 1;
    cfg.text.max_tokens = 32;
    cfg.fusion.epochs = 50;
    const auto factory = [&cfg](const core::Dataset& data, const std::vector<std::size_t>& rows) {
        return fusion::train_pipeline(data, rows, cfg);
    };
    const auto clean = eval::cross_validate(factory, ds, 3, 29);
    const auto fold_of = ingest::stratified_kfold(ds, 3, 29);
    for (int fold = 0; fold < 3; ++fold) {
        auto mutated = ds;
        for (std::size_t i = 0; i < mutated.observations.size(); ++i) {
            if (fold_of.fold_assignments[i] && *fold_of.fold_assignments[i] == fold) {
                mutated.observations[i].tmpf = *mutated.observations[i].tmpf * 1000.0 + 5.0;
            }
        }
        const auto perturbed = eval::cross_validate(factory, mutated, 3, 29);
        c.expect(perturbed.folds[static_cast<std::size_t>(fold)].standardizer_digest ==
                     clean.folds[static_cast<std::size_t>(fold)].standardizer_digest,
                 "test-fold mutation must not change that fold's fitted standardizer");
    }
}

// --------------------------------------------------------------------------
// 8. Reproducibility of the full command-line lifecycle.
int run_cli(const std::string& args) {
    const std::string cmd = std::string(WINDFUSE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return status < 0 ? status : WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_reproducibility(Checker& c) {
    const fs::path root = fs::temp_directory_path() / "windfuse_acceptance_repro";
    fs::remove_all(root);
    const std::string train_flags =
        " --trees 25 --depth 8 --epochs 5 --lr 1e-3 --d-model 16 --layers 1"
        " --max-tokens 32 --batch-size 32 --fusion-epochs 150 --seed 7";
    for (const char* run : {"A", "B"}) {
        const fs::path base = root / run;
        fs::create_directories(base);
        const std::string d = (base / "d").string();
        const std::string m = (base / "m").string();
        c.expect(run_cli("synth --n 400 --complementary --seed 7 --out " + d) == 0,
                 "synth must exit 0");
        c.expect(run_cli("train --data " + d + "/data.csv --out " + m + train_flags) == 0,
                 "train must exit 0");
        c.expect(run_cli("evaluate --data " + d + "/data.csv --model " + m +
                         " --folds 3 --out " + (base / "e").string()) == 0,
                 "evaluate must exit 0 (bundle directory form)");
        c.expect(run_cli("compare --data " + d + "/data.csv --out " + (base / "c").string() +
                         train_flags) == 0,
                 "compare must exit 0");
        c.expect(run_cli("explain --model " + m + "/model.json --data " + d +
                         "/data.csv --out " + (base / "x").string()) == 0,
                 "explain must exit 0");
        c.expect(run_cli("predict --model " + m + "/model.json --data " + d +
                         "/data.csv --out " + (base / "p").string()) == 0,
                 "predict must exit 0");
    }
    const std::vector<std::string> artifacts{
        "d/data.csv",        "m/model.json",     "m/text_curves.csv", "m/fusion_curves.csv",
        "e/eval_folds.csv",  "e/eval_report.csv", "c/compare.csv",     "x/sensitivity.csv",
        "x/ablation.csv",    "x/contrast.csv",    "p/predictions.csv"};
    for (const auto& artifact : artifacts) {
        const auto a = slurp(root / "A" / artifact);
        const auto b = slurp(root / "B" / artifact);
        c.expect(!a.empty(), artifact + " must be non-empty");
        c.expect(a == b, artifact + " must be byte-identical across runs");
    }

    // exit-code contract: 1 for usage errors, 2 for data/model errors
    c.expect(run_cli("evaluate --data " + (root / "A/d/data.csv").string() + " --out " +
                     (root / "A/e1").string() + " --folds 1") == 1,
             "folds below 2 must exit 1");
    c.expect(run_cli("predict --model " + (root / "A/no_such.json").string() + " --data " +
                     (root / "A/d/data.csv").string() + " --out " +
                     (root / "A/p2").string()) == 2,
             "missing model bundle must exit 2");
    fs::remove_all(root);
}

struct Criterion {
    int id;
    const char* label;
    double budget_seconds;
    std::function<void(Checker&)> body;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "metric identities on the published confusion counts", 1.0, criterion_metrics},
        {2, "complementary benchmark: fusion beats single streams", 600.0,
         criterion_complementary},
        {3, "forest accuracy vs analytic optimum", 120.0, criterion_forest},
        {4, "text stream training and gradient check", 120.0, criterion_text},
        {5, "fusion contract: frozen streams, exact meta gradients", 120.0, criterion_fusion},
        {6, "interpretability: ablation, sensitivity, contrast", 600.0, criterion_interpret},
        {7, "evaluation engine: AUC routes, folds, leakage", 120.0, criterion_eval_engine},
        {8, "byte-identical metric reports across CLI runs", 600.0, criterion_reproducibility},
    };

    int failed = 0;
    for (const auto& criterion : criteria) {
        Checker checker;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criterion.body(checker);
        } catch (const std::exception& e) {
            checker.failures.push_back(std::string("exception: ") + e.what());
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (elapsed > criterion.budget_seconds) {
            checker.failures.push_back("runtime " + std::to_string(elapsed) +
                                       "s exceeded budget " +
                                       std::to_string(criterion.budget_seconds) + "s");
        }
        if (checker.failures.empty()) {
            std::printf("[acceptance] criterion %d (%s): PASS (%.1fs)\n", criterion.id,
                        criterion.label, elapsed);
        } else {
            ++failed;
            std::printf("[acceptance] criterion %d (%s): FAIL (%.1fs)\n", criterion.id,
                        criterion.label, elapsed);
            for (const auto& failure : checker.failures) {
                std::printf("    failure: %s\n", failure.c_str());
            }
        }
        std::fflush(stdout);
    }
    if (failed > 0) {
        std::printf("[acceptance] %d criterion(s) failed\n", failed);
        return 1;
    }
    std::printf("[acceptance] all criteria passed\n");
    return 0;
}
