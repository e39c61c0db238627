#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "windfuse/core.hpp"
#include "windfuse/encoder.hpp"
#include "windfuse/fusion.hpp"

namespace windfuse::eval {

/// Positive class is HighRisk.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

/// Ratios with a zero denominator stay unset rather than defaulting to 0.
struct EvalReport {
    ConfusionMatrix confusion;
    std::optional<double> precision_low, recall_low, f1_low;
    std::optional<double> precision_high, recall_high, f1_high;
    double accuracy = 0.0;
    std::optional<double> macro_f1;
    std::optional<double> roc_auc;
    std::size_t support_low = 0;
    std::size_t support_high = 0;
};

ConfusionMatrix confusion(const std::vector<core::RiskLabel>& labels,
                          const std::vector<core::RiskLabel>& predictions);

EvalReport metrics(const ConfusionMatrix& cm);

/// Mann-Whitney statistic with half credit for ties: the probability that a
/// random high-risk sample scores above a random low-risk one.
double roc_auc(const std::vector<double>& scores, const std::vector<core::RiskLabel>& labels);

/// Full report for continuous scores thresholded at 0.5.
EvalReport evaluate_scores(const std::vector<double>& p_high,
                           const std::vector<core::RiskLabel>& labels);

/// Fixed emission order of the report fields.
std::vector<std::pair<std::string, std::string>> report_fields(const EvalReport& report);

using PipelineFactory =
    std::function<fusion::Pipeline(const core::Dataset&, const std::vector<std::size_t>&)>;

struct FoldResult {
    int fold = 0;
    EvalReport report;
    std::string standardizer_digest;
};

struct MetricStats {
    std::string name;
    double mean = 0.0;
    double stddev = 0.0;  // population, over folds
};

struct CrossValidationResult {
    std::vector<FoldResult> folds;
    std::vector<MetricStats> aggregate;
};

/// Stratified k-fold: for each fold the factory trains on the other k-1
/// folds' rows only; the held-out fold is scored. Fitted statistics never
/// see the held-out rows.
CrossValidationResult cross_validate(const PipelineFactory& factory, const core::Dataset& ds,
                                     int k, std::uint64_t seed);

struct BaselineRow {
    std::string model;
    double accuracy = 0.0;
    std::optional<double> macro_f1;
};

/// The five-row comparison: logistic regression, decision tree and random
/// forest on numerics, the text encoder alone, then the fused pipeline.
/// Row order is a fixed output contract.
std::vector<BaselineRow> compare_baselines(const core::Dataset& ds,
                                           const std::vector<std::size_t>& train_rows,
                                           const std::vector<std::size_t>& test_rows,
                                           const core::RunConfig& config);

/// Writes the epoch-indexed CSV plus accuracy and loss SVG charts.
/// Returns the paths written. Throws on empty input or I/O failure.
std::vector<std::string> emit_curves(const std::vector<text::EpochRecord>& records,
                                     const std::string& out_dir,
                                     const std::string& prefix = "curves");

}  // namespace windfuse::eval
