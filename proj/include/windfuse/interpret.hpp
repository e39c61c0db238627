#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "windfuse/core.hpp"
#include "windfuse/fusion.hpp"

namespace windfuse::interpret {

/// A frozen evaluation surface: per-sample standardized numerics plus a
/// score callback giving p_high for sample i with its numerics overridden.
/// Narratives stay fixed inside the callback.
struct SampleSet {
    std::vector<std::vector<double>> x_std;
    std::function<double(std::size_t, const std::vector<double>&)> score;

    std::size_t size() const { return x_std.size(); }
};

struct SensitivityReport {
    std::array<double, core::kFeatureCount> sensitivity{};
    std::string method;  // "finite-difference-pipeline" or "exact-meta"
    std::size_t sample_count = 0;
    double step = 0.0;
};

struct AblationReport {
    std::array<double, core::kFeatureCount> impact{};
    double baseline_confidence = 0.0;
    std::size_t sample_count = 0;
};

/// Indices of labeled rows the pipeline classifies as HighRisk correctly.
std::vector<std::size_t> select_correct_high_risk(const fusion::Pipeline& p,
                                                  const core::Dataset& ds,
                                                  const std::vector<std::size_t>& rows);

/// Builds the evaluation surface for the given rows: caches standardized
/// numerics and per-sample text-stream outputs. The pipeline must outlive
/// the returned set.
SampleSet make_sample_set(const fusion::Pipeline& p, const core::Dataset& ds,
                          const std::vector<std::size_t>& rows);

/// Mean central difference of p_high per standardized feature:
/// [f(x + h e_i) - f(x - h e_i)] / 2h averaged over the samples.
SensitivityReport sensitivity_fd(const SampleSet& samples, double h = 1e-3);

/// Mean analytic gradient of p_high w.r.t. the 4 fused inputs; the
/// differentiable segment of the pipeline.
std::array<double, 4> sensitivity_exact_meta(const fusion::MetaClassifier& g,
                                             const std::vector<fusion::FusedVector>& fused);

/// Zeroes each standardized feature in turn (training-mean in raw units)
/// and records max(0, baseline - ablated) of the mean p_high.
AblationReport ablate(const SampleSet& samples);

struct ContrastRow {
    std::string feature;
    double sensitivity = 0.0;
    int sensitivity_rank = 0;  // 1 = largest |sensitivity|
    double impact = 0.0;
    int impact_rank = 0;  // 1 = largest impact
};

struct ContrastReport {
    std::vector<ContrastRow> rows;  // feature order
    // (sensitivity top, ablation top) when the two methods disagree on the
    // most important feature
    std::vector<std::pair<std::string, std::string>> flagged;
};

ContrastReport contrast_report(const SensitivityReport& s, const AblationReport& a);

std::string interpretation_text(const SensitivityReport& s, std::size_t feature);
std::string interpretation_text(const AblationReport& a, std::size_t feature);

}  // namespace windfuse::interpret
