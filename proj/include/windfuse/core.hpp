#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace windfuse::core {

/// Binary risk level. HighRisk is the positive class everywhere.
enum class RiskLabel : int { LowRisk = 0, HighRisk = 1 };

constexpr int kNumClasses = 2;
constexpr std::size_t kFeatureCount = 6;

/// Fixed feature order; defines every numeric vector layout in the project.
const std::array<std::string, kFeatureCount>& feature_names();
int feature_index(const std::string& name);  // -1 if unknown

/// One station record. Missing numerics are empty optionals, never zeros.
struct Observation {
    std::string station;
    std::string timestamp;  // UTC instant, stored as given (ISO 8601)
    std::optional<double> tmpf;
    std::optional<double> dwpf;
    std::optional<double> relh;
    std::optional<double> drct;
    std::optional<double> sknt;
    std::optional<double> gust;
    std::string narrative;
    std::optional<RiskLabel> label;

    const std::optional<double>& feature(std::size_t idx) const;
    std::optional<double>& feature(std::size_t idx);
};

struct Dataset {
    std::vector<Observation> observations;

    std::size_t size() const { return observations.size(); }
};

/// Per-sample stream outputs feeding fusion: RF class probabilities and
/// text-encoder class logits, both [low, high].
struct StreamOutput {
    std::array<double, 2> rf_probs{0.0, 0.0};
    std::array<double, 2> text_logits{0.0, 0.0};
};

struct RfParams {
    int trees = 100;
    int max_depth = 12;
    // 0 means auto: ceil(sqrt(total feature count)), i.e. 3 for the six
    // numeric attributes.
    int feature_subsample = 0;
    bool bootstrap = true;
    // Appends TF-IDF features to the forest input (off by default; the
    // architecture feeds the forest the six numeric attributes only).
    bool append_tfidf = false;
};

struct TfidfParams {
    int max_terms = 1000;
    int min_df = 5;
};

struct TextParams {
    int max_tokens = 128;
    int epochs = 150;
    double lr = 3e-5;
    double weight_decay = 0.01;
    int d_model = 64;
    int n_heads = 4;
    int n_layers = 2;
    int ff_mult = 4;
    int batch_size = 32;
    TfidfParams tfidf;
};

struct FusionParams {
    int epochs = 150;
    double lr = 1e-2;
    double weight_decay = 0.01;
    int hidden = 16;
    // Fraction of the training rows held out from stream training and used
    // to fit the meta-classifier, so it sees stream outputs on rows the
    // streams did not memorize.
    double holdout_fraction = 0.25;
};

struct EvalParams {
    int folds = 5;
    double train_fraction = 0.8;
};

struct RunConfig {
    std::uint64_t seed = 7;
    RfParams rf;
    TextParams text;
    FusionParams fusion;
    EvalParams eval;
};

/// Returns one description per violated range/missingness invariant;
/// empty means the observation is valid.
std::vector<std::string> validate_observation(const Observation& obs);

struct LabelCounts {
    std::size_t low = 0;
    std::size_t high = 0;
};

/// Counts labels over the whole dataset. Throws if any observation is
/// unlabeled, naming its index.
LabelCounts label_counts(const Dataset& ds);

// JSON round-trips preserve missingness (missing -> null).
void to_json(nlohmann::json& j, const Observation& obs);
void from_json(const nlohmann::json& j, Observation& obs);
void to_json(nlohmann::json& j, const Dataset& ds);
void from_json(const nlohmann::json& j, Dataset& ds);
void to_json(nlohmann::json& j, const RunConfig& cfg);
void from_json(const nlohmann::json& j, RunConfig& cfg);

std::string label_token(RiskLabel label);  // "low" / "high"

}  // namespace windfuse::core
