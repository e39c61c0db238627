// windfuse: dual-stream wind hazard risk classifier.
// Subcommands cover the full lifecycle: synth, train, evaluate, compare,
// explain, predict. Exit codes: 0 success, 1 usage error, 2 data/model error.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "windfuse/core.hpp"
#include "windfuse/eval.hpp"
#include "windfuse/fusion.hpp"
#include "windfuse/ingest.hpp"
#include "windfuse/interpret.hpp"
#include "windfuse/synth.hpp"
#include "windfuse/util/common.hpp"

namespace fs = std::filesystem;
using namespace windfuse;

namespace {

struct ConfigFlags {
    std::optional<std::uint64_t> seed;
    std::optional<int> folds;
    std::optional<int> epochs;
    std::optional<double> lr;
    std::optional<int> trees;
    std::optional<int> depth;
    std::optional<int> vocab;
    std::optional<int> min_df;
    std::optional<int> max_tokens;
    bool rf_tfidf = false;
    // desk-scale encoder shape and trainer knobs
    std::optional<int> d_model;
    std::optional<int> n_layers;
    std::optional<int> batch_size;
    std::optional<int> fusion_epochs;
    std::optional<double> fusion_lr;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
    cmd->add_option("--seed", flags.seed, "Master seed for every derived rng stream");
    cmd->add_option("--folds", flags.folds, "Cross-validation fold count");
    cmd->add_option("--epochs", flags.epochs, "Text encoder training epochs");
    cmd->add_option("--lr", flags.lr, "Text encoder learning rate");
    cmd->add_option("--trees", flags.trees, "Random forest tree count");
    cmd->add_option("--depth", flags.depth, "Random forest maximum depth");
    cmd->add_option("--vocab", flags.vocab, "TF-IDF vocabulary cap");
    cmd->add_option("--min-df", flags.min_df, "TF-IDF document-frequency floor");
    cmd->add_option("--max-tokens", flags.max_tokens, "Token sequence length cap");
    cmd->add_flag("--rf-tfidf", flags.rf_tfidf,
                  "Also feed TF-IDF features to the random forest stream");
    cmd->add_option("--d-model", flags.d_model, "Encoder embedding width");
    cmd->add_option("--layers", flags.n_layers, "Encoder layer count");
    cmd->add_option("--batch-size", flags.batch_size, "Encoder batch size");
    cmd->add_option("--fusion-epochs", flags.fusion_epochs, "Meta-classifier training epochs");
    cmd->add_option("--fusion-lr", flags.fusion_lr, "Meta-classifier learning rate");
}

core::RunConfig resolve_config(const core::RunConfig& base, const ConfigFlags& flags) {
    core::RunConfig cfg = base;
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.folds) cfg.eval.folds = *flags.folds;
    if (flags.epochs) cfg.text.epochs = *flags.epochs;
    if (flags.lr) cfg.text.lr = *flags.lr;
    if (flags.trees) cfg.rf.trees = *flags.trees;
    if (flags.depth) cfg.rf.max_depth = *flags.depth;
    if (flags.vocab) cfg.text.tfidf.max_terms = *flags.vocab;
    if (flags.min_df) cfg.text.tfidf.min_df = *flags.min_df;
    if (flags.max_tokens) cfg.text.max_tokens = *flags.max_tokens;
    if (flags.rf_tfidf) cfg.rf.append_tfidf = true;
    if (flags.d_model) cfg.text.d_model = *flags.d_model;
    if (flags.n_layers) cfg.text.n_layers = *flags.n_layers;
    if (flags.batch_size) cfg.text.batch_size = *flags.batch_size;
    if (flags.fusion_epochs) cfg.fusion.epochs = *flags.fusion_epochs;
    if (flags.fusion_lr) cfg.fusion.lr = *flags.fusion_lr;
    return cfg;
}

void echo_config(const core::RunConfig& cfg) {
    nlohmann::json j = cfg;
    std::cout << "resolved config: " << j.dump() << "\n";
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return util::hex64(util::fnv1a64(data));
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const core::RunConfig& cfg, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& artifacts,
                    const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["command"] = command;
    j["config"] = cfg;
    j["seed"] = cfg.seed;
    nlohmann::json in_list = nlohmann::json::array();
    for (const auto& path : inputs) {
        in_list.push_back({{"path", path}, {"fnv1a64", file_digest(path)}});
    }
    j["inputs"] = in_list;
    nlohmann::json art_list = nlohmann::json::array();
    for (const auto& name : artifacts) art_list.push_back(name);
    j["artifacts"] = art_list;
    if (!extra.empty()) j["details"] = extra;
    std::ofstream out(out_dir + "/manifest.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/manifest.json");
    out << j.dump(1) << "\n";
}

std::vector<std::size_t> all_rows(const core::Dataset& ds) {
    std::vector<std::size_t> rows(ds.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return rows;
}

void write_fusion_curve(const std::vector<fusion::FusionCurvePoint>& curve,
                        const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "epoch,train_loss,train_acc\n";
    for (const auto& p : curve) {
        out << p.epoch << "," << util::fmt_double(p.train_loss) << ","
            << util::fmt_double(p.train_acc) << "\n";
    }
}

int cmd_synth(const std::string& out_dir, std::size_t n, bool complementary, double delta_num,
              double delta_text, double pi_high, const core::RunConfig& cfg) {
    fs::create_directories(out_dir);
    synth::SynthSpec spec;
    spec.n = n;
    spec.complementary = complementary;
    spec.delta_num = delta_num;
    spec.delta_text = delta_text;
    spec.pi_high = pi_high;
    spec.seed = cfg.seed;
    const auto ds = synth::generate(spec);
    const std::string data_path = out_dir + "/data.csv";
    synth::write_csv(ds, data_path);
    const auto counts = core::label_counts(ds);
    std::cout << "wrote " << data_path << " (" << ds.size() << " rows, low=" << counts.low
              << " high=" << counts.high << ")\n";
    nlohmann::json extra{{"n", n},
                         {"complementary", complementary},
                         {"delta_num", delta_num},
                         {"delta_text", delta_text},
                         {"pi_high", pi_high}};
    write_manifest(out_dir, "synth", cfg, {}, {"data.csv"}, extra);
    return 0;
}

int cmd_train(const std::string& data_path, const std::string& out_dir,
              const core::RunConfig& cfg) {
    fs::create_directories(out_dir);
    const auto ds = ingest::parse_csv_file(data_path);
    const auto pipeline = fusion::train_pipeline(ds, all_rows(ds), cfg);
    const std::string model_path = out_dir + "/model.json";
    fusion::save_pipeline(pipeline, model_path);
    std::vector<std::string> artifacts{"model.json"};
    if (!pipeline.text_curve.empty()) {
        eval::emit_curves(pipeline.text_curve, out_dir, "text_curves");
        artifacts.insert(artifacts.end(),
                         {"text_curves.csv", "text_curves_loss.svg", "text_curves_accuracy.svg"});
    }
    if (!pipeline.fusion_curve.empty()) {
        write_fusion_curve(pipeline.fusion_curve, out_dir + "/fusion_curves.csv");
        artifacts.push_back("fusion_curves.csv");
    }
    std::cout << "wrote " << model_path << "\n";
    write_manifest(out_dir, "train", cfg, {data_path}, artifacts);
    return 0;
}

int cmd_evaluate(const std::string& data_path, const std::string& out_dir,
                 const core::RunConfig& cfg) {
    fs::create_directories(out_dir);
    const auto ds = ingest::parse_csv_file(data_path);
    const auto result = eval::cross_validate(
        [&cfg](const core::Dataset& data, const std::vector<std::size_t>& rows) {
            return fusion::train_pipeline(data, rows, cfg);
        },
        ds, cfg.eval.folds, cfg.seed);

    const std::string folds_path = out_dir + "/eval_folds.csv";
    {
        std::ofstream out(folds_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + folds_path);
        out << "fold";
        for (const auto& [name, value] : eval::report_fields(result.folds.front().report)) {
            out << "," << name;
        }
        out << "\n";
        for (const auto& fr : result.folds) {
            out << fr.fold;
            for (const auto& [name, value] : eval::report_fields(fr.report)) out << "," << value;
            out << "\n";
        }
    }
    const std::string report_path = out_dir + "/eval_report.csv";
    {
        std::ofstream out(report_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + report_path);
        out << "metric,mean,std\n";
        for (const auto& stat : result.aggregate) {
            out << stat.name << "," << util::fmt_double(stat.mean) << ","
                << util::fmt_double(stat.stddev) << "\n";
        }
    }
    for (const auto& stat : result.aggregate) {
        std::cout << stat.name << ": mean " << util::fmt_double(stat.mean) << ", std "
                  << util::fmt_double(stat.stddev) << "\n";
    }
    write_manifest(out_dir, "evaluate", cfg, {data_path},
                   {"eval_folds.csv", "eval_report.csv"});
    return 0;
}

int cmd_compare(const std::string& data_path, const std::string& out_dir,
                const core::RunConfig& cfg) {
    fs::create_directories(out_dir);
    const auto ds = ingest::parse_csv_file(data_path);
    const auto split = ingest::train_test_split(ds.size(), cfg.eval.train_fraction, cfg.seed);
    const auto rows = eval::compare_baselines(ds, split.train_indices, split.test_indices, cfg);
    const std::string path = out_dir + "/compare.csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "model,accuracy,macro_f1\n";
    for (const auto& row : rows) {
        out << row.model << "," << util::fmt_double(row.accuracy) << ","
            << (row.macro_f1 ? util::fmt_double(*row.macro_f1) : "NA") << "\n";
        std::cout << row.model << ": accuracy " << util::fmt_double(row.accuracy) << ", macro_f1 "
                  << (row.macro_f1 ? util::fmt_double(*row.macro_f1) : "NA") << "\n";
    }
    out.close();
    write_manifest(out_dir, "compare", cfg, {data_path}, {"compare.csv"});
    return 0;
}

int cmd_explain(const std::string& model_path, const std::string& data_path,
                const std::string& out_dir, const std::string& method, double h,
                const core::RunConfig& cfg) {
    fs::create_directories(out_dir);
    const auto pipeline = fusion::load_pipeline(model_path);
    const auto ds = ingest::parse_csv_file(data_path);
    const auto selected = interpret::select_correct_high_risk(pipeline, ds, all_rows(ds));
    if (selected.empty()) {
        throw std::runtime_error("no correctly classified high-risk samples in " + data_path);
    }
    std::cout << "evaluation set: " << selected.size()
              << " correctly classified high-risk samples\n";

    std::vector<std::string> artifacts;
    if (method == "exact-meta") {
        std::vector<fusion::FusedVector> fused;
        for (const std::size_t r : selected) {
            const auto streams = fusion::stream_outputs(pipeline, ds.observations[r]);
            fused.push_back(fusion::fuse(streams.rf_probs, streams.text_logits));
        }
        const auto grad = interpret::sensitivity_exact_meta(pipeline.meta, fused);
        const std::string path = out_dir + "/sensitivity_meta.csv";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << "component,gradient\n";
        const char* names[4] = {"rf_prob_low", "rf_prob_high", "text_logit_low",
                                "text_logit_high"};
        for (int i = 0; i < 4; ++i) {
            out << names[i] << "," << util::fmt_double(grad[static_cast<std::size_t>(i)]) << "\n";
            std::cout << names[i] << ": " << util::fmt_double(grad[static_cast<std::size_t>(i)])
                      << "\n";
        }
        artifacts.push_back("sensitivity_meta.csv");
        write_manifest(out_dir, "explain", cfg, {model_path, data_path}, artifacts,
                       {{"method", method}, {"samples", selected.size()}});
        return 0;
    }

    const auto samples = interpret::make_sample_set(pipeline, ds, selected);
    const auto sens = interpret::sensitivity_fd(samples, h);
    const auto abl = interpret::ablate(samples);
    const auto contrast = interpret::contrast_report(sens, abl);

    {
        const std::string path = out_dir + "/sensitivity.csv";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << "feature,gradient_value,interpretation\n";
        for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
            out << core::feature_names()[f] << "," << util::fmt_double(sens.sensitivity[f]) << ","
                << util::csv_field(interpret::interpretation_text(sens, f)) << "\n";
        }
        artifacts.push_back("sensitivity.csv");
    }
    {
        const std::string path = out_dir + "/ablation.csv";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << "feature,ablation_impact,interpretation\n";
        for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
            out << core::feature_names()[f] << "," << util::fmt_double(abl.impact[f]) << ","
                << util::csv_field(interpret::interpretation_text(abl, f)) << "\n";
        }
        artifacts.push_back("ablation.csv");
    }
    {
        const std::string path = out_dir + "/contrast.csv";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << "feature,sensitivity,sensitivity_rank,ablation_impact,ablation_rank\n";
        for (const auto& row : contrast.rows) {
            out << row.feature << "," << util::fmt_double(row.sensitivity) << ","
                << row.sensitivity_rank << "," << util::fmt_double(row.impact) << ","
                << row.impact_rank << "\n";
        }
        artifacts.push_back("contrast.csv");
    }

    std::cout << "feature      sensitivity      rank   ablation_impact  rank\n";
    for (const auto& row : contrast.rows) {
        std::printf("%-12s %15.6g %6d %17.6g %5d\n", row.feature.c_str(), row.sensitivity,
                    row.sensitivity_rank, row.impact, row.impact_rank);
    }
    for (const auto& [sens_top, abl_top] : contrast.flagged) {
        std::cout << "rank disagreement: sensitivity points at '" << sens_top
                  << "' while ablation points at '" << abl_top << "'\n";
    }
    nlohmann::json extra{{"method", method}, {"h", h}, {"samples", selected.size()}};
    if (!contrast.flagged.empty()) {
        extra["flagged"] = {{"sensitivity_top", contrast.flagged.front().first},
                            {"ablation_top", contrast.flagged.front().second}};
    }
    write_manifest(out_dir, "explain", cfg, {model_path, data_path}, artifacts, extra);
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto pipeline = fusion::load_pipeline(model_path);
    const auto ds = ingest::parse_csv_file(data_path);
    const auto predictions = fusion::predict_batch(pipeline, ds, all_rows(ds));
    const std::string path = out_dir + "/predictions.csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "row,p_high,label\n";
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        out << i << "," << util::fmt_double(predictions[i].p_high) << ","
            << core::label_token(predictions[i].label) << "\n";
    }
    out.close();
    std::cout << "wrote " << path << " (" << predictions.size() << " rows)\n";
    write_manifest(out_dir, "predict", pipeline.config, {model_path, data_path},
                   {"predictions.csv"});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"windfuse: dual-stream wind hazard risk classification"};
    app.require_subcommand(1);

    ConfigFlags flags;
    std::string data_path, model_path, out_dir = ".";
    std::size_t synth_n = 10000;
    bool complementary = false;
    double delta_num = 2.0, delta_text = 0.8, pi_high = 0.5;
    std::string method = "fd";
    double fd_step = 1e-3;

    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic station CSV");
    synth_cmd->add_option("--n", synth_n, "Sample count");
    synth_cmd->add_flag("--complementary", complementary,
                        "Split the signal between the numeric and text channels");
    synth_cmd->add_option("--delta-num", delta_num, "Numeric class separation");
    synth_cmd->add_option("--delta-text", delta_text, "Keyword emission probability gap");
    synth_cmd->add_option("--pi-high", pi_high, "High-risk prior");
    synth_cmd->add_option("--out", out_dir, "Output directory")->required();
    add_config_flags(synth_cmd, flags);

    auto* train_cmd = app.add_subcommand("train", "Train the full pipeline");
    train_cmd->add_option("--data", data_path, "Training CSV")->required();
    train_cmd->add_option("--out", out_dir, "Output directory")->required();
    add_config_flags(train_cmd, flags);

    auto* eval_cmd = app.add_subcommand("evaluate", "Stratified k-fold cross-validation");
    eval_cmd->add_option("--data", data_path, "Labeled CSV")->required();
    eval_cmd->add_option("--model", model_path, "Pipeline bundle supplying the base config");
    eval_cmd->add_option("--out", out_dir, "Output directory")->required();
    add_config_flags(eval_cmd, flags);

    auto* compare_cmd = app.add_subcommand("compare", "Single-stream baselines vs the fused model");
    compare_cmd->add_option("--data", data_path, "Labeled CSV")->required();
    compare_cmd->add_option("--out", out_dir, "Output directory")->required();
    add_config_flags(compare_cmd, flags);

    auto* explain_cmd = app.add_subcommand("explain", "Sensitivity and ablation reports");
    explain_cmd->add_option("--model", model_path, "Pipeline bundle")->required();
    explain_cmd->add_option("--data", data_path, "Labeled CSV")->required();
    explain_cmd->add_option("--out", out_dir, "Output directory")->required();
    explain_cmd->add_option("--method", method, "fd | exact-meta")
        ->check(CLI::IsMember({"fd", "exact-meta"}));
    explain_cmd->add_option("--fd-step", fd_step, "Finite-difference step (standardized units)");
    add_config_flags(explain_cmd, flags);

    auto* predict_cmd = app.add_subcommand("predict", "Score a CSV with a trained pipeline");
    predict_cmd->add_option("--model", model_path, "Pipeline bundle")->required();
    predict_cmd->add_option("--data", data_path, "Input CSV")->required();
    predict_cmd->add_option("--out", out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (flags.folds && *flags.folds < 2) {
        std::cerr << "folds must be >= 2\n";
        return 1;
    }

    try {
        core::RunConfig base;
        if (!model_path.empty() &&
            (eval_cmd->parsed() || explain_cmd->parsed() || predict_cmd->parsed())) {
            base = fusion::load_pipeline(model_path).config;
        }
        const core::RunConfig cfg = resolve_config(base, flags);
        if (eval_cmd->parsed() && cfg.eval.folds < 2) {
            std::cerr << "folds must be >= 2\n";
            return 1;
        }
        echo_config(cfg);
        if (synth_cmd->parsed()) {
            return cmd_synth(out_dir, synth_n, complementary, delta_num, delta_text, pi_high, cfg);
        }
        if (train_cmd->parsed()) return cmd_train(data_path, out_dir, cfg);
        if (eval_cmd->parsed()) return cmd_evaluate(data_path, out_dir, cfg);
        if (compare_cmd->parsed()) return cmd_compare(data_path, out_dir, cfg);
        if (explain_cmd->parsed()) {
            return cmd_explain(model_path, data_path, out_dir, method, fd_step, cfg);
        }
        if (predict_cmd->parsed()) return cmd_predict(model_path, data_path, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
