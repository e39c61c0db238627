#include "windfuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "windfuse/util/common.hpp"
#include "windfuse/util/rng.hpp"

namespace windfuse::synth {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

bool is_informative(const SynthSpec& spec, int f) {
    return std::find(spec.informative_features.begin(), spec.informative_features.end(), f) !=
           spec.informative_features.end();
}

// Affine maps from the latent unit-variance channel into plausible station
// units. Slopes keep the hard range limits at least ~5 sigma away for the
// class means used in practice (|delta|/2 <= 2), so the clamps below fire
// with negligible probability and the closed-form accuracy stays exact at
// test tolerances.
struct FeatureScale {
    double offset;
    double slope;
    double lo;
    double hi;
};

constexpr FeatureScale kScales[core::kFeatureCount] = {
    {65.0, 15.0, -1e30, 1e30},   // tmpf
    {48.0, 12.0, -1e30, 1e30},   // dwpf
    {55.0, 6.0, 0.0, 100.0},     // relh
    {180.0, 25.0, 0.0, 360.0},   // drct
    {25.0, 3.5, 0.0, 1e30},      // sknt
    {30.0, 4.0, 0.0, 1e30},      // gust
};

const char* kNeutralTemplates[] = {
    "Routine observation logged at the gateway station.",
    "Scattered clouds with seasonal conditions across the area.",
    "Automated sensor sweep completed without interruption.",
    "Field crew noted typical prairie weather through the period.",
};

const char* kHighSentence = "Strong gusts tore through the area and damage was reported.";
const char* kLowSentence = "Winds stayed calm and conditions remained quiet.";

// Civil-date helper (days -> y/m/d), era-based.
void civil_from_days(long z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long year = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<int>(year + (m <= 2));
}

std::string timestamp_at_hour(std::size_t hour_index) {
    // epoch: 2023-01-01T00:00Z = day 19358 since 1970-01-01
    const long day = 19358 + static_cast<long>(hour_index / 24);
    const unsigned hour = static_cast<unsigned>(hour_index % 24);
    int y;
    unsigned m, d;
    civil_from_days(day, y, m, d);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02u:00Z", y, m, d, hour);
    return std::string(buf);
}

}  // namespace

core::Dataset generate(const SynthSpec& spec) {
    if (spec.n < 2) throw std::invalid_argument("generate: need n >= 2");
    if (!(spec.pi_high > 0.0 && spec.pi_high < 1.0)) {
        throw std::invalid_argument("generate: pi_high must be in (0, 1)");
    }
    util::Rng rng(util::derive_seed(spec.seed, 0x5f9d));
    core::Dataset ds;
    ds.observations.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const bool high = rng.bernoulli(spec.pi_high);
        // complementary mode: even rows carry the numeric signal, odd rows the text signal
        const bool numeric_signal = !spec.complementary || (i % 2 == 0);
        const bool text_signal = !spec.complementary || (i % 2 == 1);

        core::Observation obs;
        obs.station = "KSYN";
        obs.timestamp = timestamp_at_hour(i);
        for (int f = 0; f < static_cast<int>(core::kFeatureCount); ++f) {
            double mean = 0.0;
            if (numeric_signal && is_informative(spec, f)) {
                mean = (high ? 1.0 : -1.0) * spec.delta_num / 2.0;
            }
            const double latent = rng.gaussian(mean, 1.0);
            const FeatureScale& scale = kScales[f];
            const double raw =
                std::clamp(scale.offset + scale.slope * latent, scale.lo, scale.hi);
            obs.feature(static_cast<std::size_t>(f)) = raw;
        }

        std::string narrative =
            kNeutralTemplates[rng.below(std::size(kNeutralTemplates))];
        const double gap = text_signal ? spec.delta_text / 2.0 : 0.0;
        const double p_high_kw = high ? 0.5 + gap : 0.5 - gap;
        const double p_low_kw = high ? 0.5 - gap : 0.5 + gap;
        if (rng.bernoulli(p_high_kw)) {
            narrative += " ";
            narrative += kHighSentence;
        }
        if (rng.bernoulli(p_low_kw)) {
            narrative += " ";
            narrative += kLowSentence;
        }
        obs.narrative = std::move(narrative);
        obs.label = high ? core::RiskLabel::HighRisk : core::RiskLabel::LowRisk;
        ds.observations.push_back(std::move(obs));
    }
    return ds;
}

double bayes_accuracy(const SynthSpec& spec) {
    if (spec.complementary) {
        throw std::runtime_error(
            "bayes_accuracy: complementary specs have no closed-form optimum");
    }
    if (spec.delta_num < 0.0 || spec.delta_text < 0.0 || spec.delta_text > 1.0) {
        throw std::runtime_error("bayes_accuracy: unsupported spec shape");
    }
    const double pi = spec.pi_high;
    const double delta =
        spec.delta_num * std::sqrt(static_cast<double>(spec.informative_features.size()));
    const double p = 0.5 + spec.delta_text / 2.0;  // class-matched keyword probability
    const double q = 0.5 - spec.delta_text / 2.0;

    double accuracy = 0.0;
    for (int a = 0; a <= 1; ++a) {
        for (int b = 0; b <= 1; ++b) {
            auto emit = [](double prob, int bit) { return bit ? prob : 1.0 - prob; };
            const double po_high = emit(p, a) * emit(q, b);
            const double po_low = emit(q, a) * emit(p, b);
            if (delta > 0.0) {
                const double c = std::log((pi * po_high) / ((1.0 - pi) * po_low));
                accuracy += pi * po_high * normal_cdf(delta / 2.0 + c / delta) +
                            (1.0 - pi) * po_low * normal_cdf(delta / 2.0 - c / delta);
            } else {
                accuracy += std::max(pi * po_high, (1.0 - pi) * po_low);
            }
        }
    }
    return accuracy;
}

void write_csv(const core::Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "station,valid,tmpf,dwpf,relh,drct,sknt,gust,narrative,label\n";
    for (const auto& obs : ds.observations) {
        out << util::csv_field(obs.station) << "," << util::csv_field(obs.timestamp);
        for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
            out << ",";
            const auto& v = obs.feature(f);
            out << (v ? util::fmt_double(*v) : "M");
        }
        out << "," << util::csv_field(obs.narrative) << ",";
        if (obs.label) out << core::label_token(*obs.label);
        out << "\n";
    }
}

}  // namespace windfuse::synth
