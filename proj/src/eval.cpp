#include "windfuse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "windfuse/ingest.hpp"
#include "windfuse/tabular.hpp"
#include "windfuse/util/common.hpp"

namespace windfuse::eval {

ConfusionMatrix confusion(const std::vector<core::RiskLabel>& labels,
                          const std::vector<core::RiskLabel>& predictions) {
    if (labels.size() != predictions.size() || labels.empty()) {
        throw std::invalid_argument("confusion: labels/predictions length mismatch");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool actual_high = labels[i] == core::RiskLabel::HighRisk;
        const bool pred_high = predictions[i] == core::RiskLabel::HighRisk;
        if (actual_high && pred_high) ++cm.tp;
        else if (actual_high && !pred_high) ++cm.fn;
        else if (!actual_high && pred_high) ++cm.fp;
        else ++cm.tn;
    }
    return cm;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> f1_of(const std::optional<double>& p, const std::optional<double>& r) {
    if (!p || !r) return std::nullopt;
    const double sum = *p + *r;
    if (sum == 0.0) return std::nullopt;
    return 2.0 * (*p) * (*r) / sum;
}

}  // namespace

EvalReport metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw std::invalid_argument("metrics: empty confusion matrix");
    EvalReport report;
    report.confusion = cm;
    report.support_high = cm.tp + cm.fn;
    report.support_low = cm.tn + cm.fp;
    report.precision_high = ratio(cm.tp, cm.tp + cm.fp);
    report.recall_high = ratio(cm.tp, cm.tp + cm.fn);
    report.f1_high = f1_of(report.precision_high, report.recall_high);
    report.precision_low = ratio(cm.tn, cm.tn + cm.fn);
    report.recall_low = ratio(cm.tn, cm.tn + cm.fp);
    report.f1_low = f1_of(report.precision_low, report.recall_low);
    report.accuracy =
        static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    if (report.f1_low && report.f1_high) {
        report.macro_f1 = 0.5 * (*report.f1_low + *report.f1_high);
    }
    return report;
}

double roc_auc(const std::vector<double>& scores, const std::vector<core::RiskLabel>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw std::invalid_argument("roc_auc: scores/labels length mismatch");
    }
    // sort by score; ranks give the Mann-Whitney U with tie half-credit
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::size_t n_high = 0, n_low = 0;
    for (const auto label : labels) {
        (label == core::RiskLabel::HighRisk ? n_high : n_low)++;
    }
    if (n_high == 0 || n_low == 0) {
        throw std::runtime_error("roc_auc: both classes must be present");
    }

    double rank_sum_high = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        // average rank for the tie group, ranks are 1-based
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == core::RiskLabel::HighRisk) rank_sum_high += avg_rank;
        }
        i = j + 1;
    }
    const double nh = static_cast<double>(n_high);
    const double nl = static_cast<double>(n_low);
    const double u = rank_sum_high - nh * (nh + 1.0) / 2.0;
    return u / (nh * nl);
}

EvalReport evaluate_scores(const std::vector<double>& p_high,
                           const std::vector<core::RiskLabel>& labels) {
    std::vector<core::RiskLabel> predictions(p_high.size());
    for (std::size_t i = 0; i < p_high.size(); ++i) {
        predictions[i] =
            p_high[i] >= 0.5 ? core::RiskLabel::HighRisk : core::RiskLabel::LowRisk;
    }
    EvalReport report = metrics(confusion(labels, predictions));
    bool has_high = false, has_low = false;
    for (const auto label : labels) {
        (label == core::RiskLabel::HighRisk ? has_high : has_low) = true;
    }
    if (has_high && has_low) report.roc_auc = roc_auc(p_high, labels);
    return report;
}

namespace {

std::string opt_str(const std::optional<double>& v) {
    return v ? util::fmt_double(*v) : "NA";
}

}  // namespace

std::vector<std::pair<std::string, std::string>> report_fields(const EvalReport& r) {
    return {
        {"precision_low", opt_str(r.precision_low)},
        {"recall_low", opt_str(r.recall_low)},
        {"f1_low", opt_str(r.f1_low)},
        {"precision_high", opt_str(r.precision_high)},
        {"recall_high", opt_str(r.recall_high)},
        {"f1_high", opt_str(r.f1_high)},
        {"accuracy", util::fmt_double(r.accuracy)},
        {"macro_f1", opt_str(r.macro_f1)},
        {"roc_auc", opt_str(r.roc_auc)},
        {"tp", std::to_string(r.confusion.tp)},
        {"fp", std::to_string(r.confusion.fp)},
        {"tn", std::to_string(r.confusion.tn)},
        {"fn", std::to_string(r.confusion.fn)},
    };
}

CrossValidationResult cross_validate(const PipelineFactory& factory, const core::Dataset& ds,
                                     int k, std::uint64_t seed) {
    const auto spec = ingest::stratified_kfold(ds, k, seed);
    CrossValidationResult result;
    for (int fold = 0; fold < k; ++fold) {
        std::vector<std::size_t> train_rows, test_rows;
        for (std::size_t i = 0; i < spec.fold_assignments.size(); ++i) {
            if (!spec.fold_assignments[i]) continue;
            (*spec.fold_assignments[i] == fold ? test_rows : train_rows).push_back(i);
        }
        const fusion::Pipeline pipeline = factory(ds, train_rows);
        const auto predictions = fusion::predict_batch(pipeline, ds, test_rows);
        std::vector<double> scores(predictions.size());
        std::vector<core::RiskLabel> labels(predictions.size());
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            scores[i] = predictions[i].p_high;
            labels[i] = *ds.observations[test_rows[i]].label;
        }
        FoldResult fr;
        fr.fold = fold;
        fr.report = evaluate_scores(scores, labels);
        fr.standardizer_digest = ingest::digest(pipeline.standardizer);
        result.folds.push_back(std::move(fr));
    }

    auto aggregate = [&](const std::string& name,
                         const std::function<std::optional<double>(const EvalReport&)>& get) {
        std::vector<double> values;
        for (const auto& fr : result.folds) {
            const auto v = get(fr.report);
            if (v) values.push_back(*v);
        }
        if (values.empty()) return;
        const double mean =
            std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        double var = 0.0;
        for (const double v : values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(values.size());
        result.aggregate.push_back({name, mean, std::sqrt(var)});
    };
    aggregate("accuracy", [](const EvalReport& r) { return std::optional<double>(r.accuracy); });
    aggregate("macro_f1", [](const EvalReport& r) { return r.macro_f1; });
    aggregate("roc_auc", [](const EvalReport& r) { return r.roc_auc; });
    aggregate("precision_high", [](const EvalReport& r) { return r.precision_high; });
    aggregate("recall_high", [](const EvalReport& r) { return r.recall_high; });
    aggregate("f1_high", [](const EvalReport& r) { return r.f1_high; });
    return result;
}

namespace {

EvalReport evaluate_tabular_scores(
    const std::function<std::array<double, 2>(const std::vector<double>&)>& proba,
    const tabular::Matrix& x, const std::vector<core::RiskLabel>& labels) {
    std::vector<double> scores(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) scores[i] = proba(x[i])[1];
    return evaluate_scores(scores, labels);
}

}  // namespace

std::vector<BaselineRow> compare_baselines(const core::Dataset& ds,
                                           const std::vector<std::size_t>& train_rows,
                                           const std::vector<std::size_t>& test_rows,
                                           const core::RunConfig& config) {
    // numeric matrices, statistics fitted on the training rows only
    const auto imputer = ingest::fit_imputer(ds, train_rows);
    const auto train_imputed = ingest::impute(ds, train_rows, imputer);
    std::vector<std::size_t> local_train(train_rows.size());
    std::iota(local_train.begin(), local_train.end(), std::size_t{0});
    const auto stats = ingest::fit_standardizer(train_imputed, local_train);
    const tabular::Matrix x_train = ingest::apply_standardizer(stats, train_imputed, local_train);
    const auto test_imputed = ingest::impute(ds, test_rows, imputer);
    std::vector<std::size_t> local_test(test_rows.size());
    std::iota(local_test.begin(), local_test.end(), std::size_t{0});
    const tabular::Matrix x_test = ingest::apply_standardizer(stats, test_imputed, local_test);

    std::vector<int> y_train;
    std::vector<core::RiskLabel> test_labels;
    for (const std::size_t r : train_rows) y_train.push_back(static_cast<int>(*ds.observations[r].label));
    for (const std::size_t r : test_rows) test_labels.push_back(*ds.observations[r].label);

    std::vector<BaselineRow> rows;

    {
        const auto model = tabular::fit_logistic(x_train, y_train, {});
        const auto report = evaluate_tabular_scores(
            [&](const std::vector<double>& x) { return tabular::logistic_predict_proba(model, x); },
            x_test, test_labels);
        rows.push_back({"logistic_regression_numeric", report.accuracy, report.macro_f1});
    }
    {
        tabular::ForestParams params;
        params.n_trees = 1;
        params.max_depth = config.rf.max_depth;
        params.feature_subsample = static_cast<int>(core::kFeatureCount);  // plain tree: all features
        params.bootstrap = false;
        const auto model = tabular::fit_forest(x_train, y_train, params,
                                               util::derive_seed(config.seed, 0xd7));
        const auto report = evaluate_tabular_scores(
            [&](const std::vector<double>& x) { return tabular::forest_predict_proba(model, x); },
            x_test, test_labels);
        rows.push_back({"decision_tree_numeric", report.accuracy, report.macro_f1});
    }
    {
        tabular::ForestParams params;
        params.n_trees = config.rf.trees;
        params.max_depth = config.rf.max_depth;
        params.feature_subsample = config.rf.feature_subsample;
        params.bootstrap = config.rf.bootstrap;
        const auto model = tabular::fit_forest(x_train, y_train, params,
                                               util::derive_seed(config.seed, 0xf02e57));
        const auto report = evaluate_tabular_scores(
            [&](const std::vector<double>& x) { return tabular::forest_predict_proba(model, x); },
            x_test, test_labels);
        rows.push_back({"random_forest_numeric", report.accuracy, report.macro_f1});
    }
    {
        std::vector<std::vector<std::string>> docs;
        for (const std::size_t r : train_rows) {
            docs.push_back(text::tokenize(ds.observations[r].narrative));
        }
        const auto vocab = text::build_vocabulary(docs);
        text::EncoderConfig enc_cfg;
        enc_cfg.d_model = config.text.d_model;
        enc_cfg.n_heads = config.text.n_heads;
        enc_cfg.n_layers = config.text.n_layers;
        enc_cfg.ff_mult = config.text.ff_mult;
        enc_cfg.max_positions = config.text.max_tokens;
        auto model = text::init_encoder(enc_cfg, vocab.size(),
                                        util::derive_seed(config.seed, 0x7e47));
        text::TrainParams params;
        params.epochs = config.text.epochs;
        params.lr = config.text.lr;
        params.weight_decay = config.text.weight_decay;
        params.batch_size = config.text.batch_size;
        params.seed = util::derive_seed(config.seed, 0x7e47a1);
        text::train_encoder(model, vocab, docs, y_train, params);

        std::vector<double> scores(test_rows.size());
        for (std::size_t i = 0; i < test_rows.size(); ++i) {
            const auto logits = text::encode(
                model, vocab, text::tokenize(ds.observations[test_rows[i]].narrative));
            const double m = std::max(logits(0), logits(1));
            const double e0 = std::exp(logits(0) - m);
            const double e1 = std::exp(logits(1) - m);
            scores[i] = e1 / (e0 + e1);
        }
        const auto report = evaluate_scores(scores, test_labels);
        rows.push_back({"text_encoder_text_only", report.accuracy, report.macro_f1});
    }
    {
        const auto pipeline = fusion::train_pipeline(ds, train_rows, config);
        const auto predictions = fusion::predict_batch(pipeline, ds, test_rows);
        std::vector<double> scores(predictions.size());
        for (std::size_t i = 0; i < predictions.size(); ++i) scores[i] = predictions[i].p_high;
        const auto report = evaluate_scores(scores, test_labels);
        rows.push_back({"dual_stream_fused", report.accuracy, report.macro_f1});
    }
    return rows;
}

namespace {

struct Series {
    std::string name;
    std::string color;
    std::vector<double> values;
};

// Minimal deterministic SVG line chart; no timestamps or external assets.
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<Series>& series) {
    const double width = 640.0, height = 400.0;
    const double ml = 60.0, mr = 20.0, mt = 40.0, mb = 40.0;
    double lo = 0.0, hi = 1e-12;
    std::size_t n = 0;
    for (const auto& s : series) {
        n = std::max(n, s.values.size());
        for (const double v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi <= lo) hi = lo + 1.0;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "  <text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
    out << "  <line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
        << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
    out << "  <line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << height - mb << "\" stroke=\"black\"/>\n";
    const double plot_w = width - ml - mr;
    const double plot_h = height - mt - mb;
    auto x_at = [&](std::size_t i) {
        return n <= 1 ? ml : ml + plot_w * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    auto y_at = [&](double v) { return height - mb - plot_h * (v - lo) / (hi - lo); };
    int legend_y = 0;
    for (const auto& s : series) {
        if (s.values.empty()) continue;
        out << "  <polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            out << x_at(i) << "," << y_at(s.values[i]) << " ";
        }
        out << "\"/>\n";
        out << "  <text x=\"" << width - mr - 150 << "\" y=\"" << mt + 16 * legend_y
            << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << s.color << "\">"
            << s.name << "</text>\n";
        ++legend_y;
    }
    // axis extremes
    out << "  <text x=\"" << ml - 6 << "\" y=\"" << height - mb << "\" text-anchor=\"end\" "
        << "font-family=\"sans-serif\" font-size=\"10\">" << util::fmt_double(lo) << "</text>\n";
    out << "  <text x=\"" << ml - 6 << "\" y=\"" << mt + 8 << "\" text-anchor=\"end\" "
        << "font-family=\"sans-serif\" font-size=\"10\">" << util::fmt_double(hi) << "</text>\n";
    out << "</svg>\n";
}

}  // namespace

std::vector<std::string> emit_curves(const std::vector<text::EpochRecord>& records,
                                     const std::string& out_dir, const std::string& prefix) {
    if (records.empty()) throw std::invalid_argument("emit_curves: no epoch records");
    std::filesystem::create_directories(out_dir);
    const std::string csv_path = out_dir + "/" + prefix + ".csv";
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + csv_path);
    csv << "epoch,train_loss,val_loss,train_acc,val_acc\n";
    const bool has_val = records.front().val_loss >= 0.0;
    for (const auto& r : records) {
        csv << r.epoch << "," << util::fmt_double(r.train_loss) << ","
            << (has_val ? util::fmt_double(r.val_loss) : std::string()) << ","
            << util::fmt_double(r.train_acc) << ","
            << (has_val ? util::fmt_double(r.val_acc) : std::string()) << "\n";
    }
    csv.close();

    Series train_loss{"train loss", "#1f77b4", {}};
    Series val_loss{"validation loss", "#d62728", {}};
    Series train_acc{"train accuracy", "#1f77b4", {}};
    Series val_acc{"validation accuracy", "#d62728", {}};
    for (const auto& r : records) {
        train_loss.values.push_back(r.train_loss);
        train_acc.values.push_back(r.train_acc);
        if (has_val) {
            val_loss.values.push_back(r.val_loss);
            val_acc.values.push_back(r.val_acc);
        }
    }
    const std::string loss_path = out_dir + "/" + prefix + "_loss.svg";
    const std::string acc_path = out_dir + "/" + prefix + "_accuracy.svg";
    std::vector<Series> loss_series{train_loss};
    std::vector<Series> acc_series{train_acc};
    if (has_val) {
        loss_series.push_back(val_loss);
        acc_series.push_back(val_acc);
    }
    write_svg_chart(loss_path, "Loss over epochs", loss_series);
    write_svg_chart(acc_path, "Accuracy over epochs", acc_series);
    return {csv_path, loss_path, acc_path};
}

}  // namespace windfuse::eval
