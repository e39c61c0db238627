#include "windfuse/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "windfuse/text.hpp"

namespace windfuse::interpret {

std::vector<std::size_t> select_correct_high_risk(const fusion::Pipeline& p,
                                                  const core::Dataset& ds,
                                                  const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> selected;
    for (const std::size_t r : rows) {
        const auto& obs = ds.observations.at(r);
        if (!obs.label || *obs.label != core::RiskLabel::HighRisk) continue;
        if (fusion::predict(p, obs).label == core::RiskLabel::HighRisk) selected.push_back(r);
    }
    return selected;
}

SampleSet make_sample_set(const fusion::Pipeline& p, const core::Dataset& ds,
                          const std::vector<std::size_t>& rows) {
    p.validate();
    SampleSet set;
    set.x_std.reserve(rows.size());
    auto text_logits = std::make_shared<std::vector<std::array<double, 2>>>();
    auto tfidf_dense = std::make_shared<std::vector<std::vector<double>>>();
    const bool with_tfidf = p.config.rf.append_tfidf;
    for (const std::size_t r : rows) {
        const auto& obs = ds.observations.at(r);
        set.x_std.push_back(ingest::standardize_row(p.standardizer, obs, p.imputer));
        const auto streams = fusion::stream_outputs(p, obs);
        text_logits->push_back(streams.text_logits);
        if (with_tfidf) {
            tfidf_dense->push_back(
                text::tfidf_transform_dense(*p.tfidf, text::tokenize(obs.narrative)));
        }
    }
    const fusion::Pipeline* pipeline = &p;
    set.score = [pipeline, text_logits, tfidf_dense, with_tfidf](
                    std::size_t i, const std::vector<double>& x) {
        const std::vector<double>* dense = with_tfidf ? &(*tfidf_dense)[i] : nullptr;
        return fusion::p_high_given(*pipeline, x, (*text_logits)[i], dense);
    };
    return set;
}

SensitivityReport sensitivity_fd(const SampleSet& samples, double h) {
    if (samples.size() == 0) throw std::invalid_argument("sensitivity_fd: empty sample set");
    if (!(h > 0.0)) throw std::invalid_argument("sensitivity_fd: step must be positive");
    SensitivityReport report;
    report.method = "finite-difference-pipeline";
    report.sample_count = samples.size();
    report.step = h;
    for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
        double acc = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            std::vector<double> x = samples.x_std[i];
            x[f] = samples.x_std[i][f] + h;
            const double up = samples.score(i, x);
            x[f] = samples.x_std[i][f] - h;
            const double down = samples.score(i, x);
            acc += (up - down) / (2.0 * h);
        }
        report.sensitivity[f] = acc / static_cast<double>(samples.size());
    }
    return report;
}

std::array<double, 4> sensitivity_exact_meta(const fusion::MetaClassifier& g,
                                             const std::vector<fusion::FusedVector>& fused) {
    if (fused.empty()) throw std::invalid_argument("sensitivity_exact_meta: empty sample set");
    std::array<double, 4> acc{};
    for (const auto& z : fused) {
        const auto grad = fusion::meta_input_gradient(g, z);
        for (std::size_t i = 0; i < 4; ++i) acc[i] += grad[i];
    }
    for (auto& v : acc) v /= static_cast<double>(fused.size());
    return acc;
}

AblationReport ablate(const SampleSet& samples) {
    if (samples.size() == 0) throw std::invalid_argument("ablate: empty sample set");
    AblationReport report;
    report.sample_count = samples.size();
    double baseline = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        baseline += samples.score(i, samples.x_std[i]);
    }
    baseline /= static_cast<double>(samples.size());
    report.baseline_confidence = baseline;
    for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
        double ablated = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            std::vector<double> x = samples.x_std[i];
            x[f] = 0.0;  // the training mean in raw units
            ablated += samples.score(i, x);
        }
        ablated /= static_cast<double>(samples.size());
        report.impact[f] = std::max(0.0, baseline - ablated);
    }
    return report;
}

namespace {

std::array<int, core::kFeatureCount> ranks_desc(const std::array<double, core::kFeatureCount>& v) {
    std::array<std::size_t, core::kFeatureCount> order{};
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    std::array<int, core::kFeatureCount> rank{};
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        rank[order[pos]] = static_cast<int>(pos) + 1;
    }
    return rank;
}

}  // namespace

ContrastReport contrast_report(const SensitivityReport& s, const AblationReport& a) {
    std::array<double, core::kFeatureCount> magnitude{};
    for (std::size_t f = 0; f < core::kFeatureCount; ++f) magnitude[f] = std::abs(s.sensitivity[f]);
    const auto sens_rank = ranks_desc(magnitude);
    const auto abl_rank = ranks_desc(a.impact);

    ContrastReport report;
    std::string sens_top, abl_top;
    for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
        ContrastRow row;
        row.feature = core::feature_names()[f];
        row.sensitivity = s.sensitivity[f];
        row.sensitivity_rank = sens_rank[f];
        row.impact = a.impact[f];
        row.impact_rank = abl_rank[f];
        if (row.sensitivity_rank == 1) sens_top = row.feature;
        if (row.impact_rank == 1) abl_top = row.feature;
        report.rows.push_back(std::move(row));
    }
    if (sens_top != abl_top) report.flagged.emplace_back(sens_top, abl_top);
    return report;
}

std::string interpretation_text(const SensitivityReport& s, std::size_t feature) {
    const auto rank = ranks_desc([&] {
        std::array<double, core::kFeatureCount> m{};
        for (std::size_t f = 0; f < core::kFeatureCount; ++f) m[f] = std::abs(s.sensitivity[f]);
        return m;
    }());
    const double v = s.sensitivity[feature];
    std::string text;
    if (rank[feature] == 1) {
        text = "strongest local influence on the risk score";
    } else if (v > 0.0) {
        text = "increase raises high-risk confidence";
    } else if (v < 0.0) {
        text = "increase lowers high-risk confidence";
    } else {
        text = "no measurable local influence";
    }
    return text;
}

std::string interpretation_text(const AblationReport& a, std::size_t feature) {
    const auto rank = ranks_desc(a.impact);
    if (a.impact[feature] <= 0.0) {
        return "removal leaves high-risk confidence essentially unchanged";
    }
    if (rank[feature] == 1) {
        return "largest confidence drop when removed; the model depends on it";
    }
    return "removal reduces high-risk confidence";
}

}  // namespace windfuse::interpret
