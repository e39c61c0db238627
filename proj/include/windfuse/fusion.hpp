#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "windfuse/core.hpp"
#include "windfuse/encoder.hpp"
#include "windfuse/ingest.hpp"
#include "windfuse/tabular.hpp"
#include "windfuse/text.hpp"

namespace windfuse::fusion {

/// Concatenation [rf probabilities; text logits] feeding the meta-classifier.
struct FusedVector {
    std::array<double, 4> values{};
};

/// Validates that z_rf is a probability vector (sum within 1e-6 of 1,
/// entries in [0,1]) and concatenates.
FusedVector fuse(const std::array<double, 2>& z_rf, const std::array<double, 2>& z_text);

/// One-hidden-layer ReLU network, 4 -> hidden -> 2.
struct MetaClassifier {
    Eigen::MatrixXd w1;  // hidden x 4
    Eigen::VectorXd b1;  // hidden
    Eigen::MatrixXd w2;  // 2 x hidden
    Eigen::VectorXd b2;  // 2

    bool initialized() const { return w1.size() > 0; }
};

MetaClassifier init_meta(int hidden, std::uint64_t seed);

struct MetaOutput {
    std::array<double, 2> logits{};
    double p_high = 0.0;
};

MetaOutput meta_forward(const MetaClassifier& g, const FusedVector& z);

/// Binary cross-entropy, p clamped to [1e-12, 1 - 1e-12]; y is 0/1.
double cross_entropy(double p_high, int y);

/// Loss and analytic gradients of cross_entropy(meta_forward(z), y); used
/// by the trainer and the finite-difference checks. d_input is optional.
double meta_loss_grad(const MetaClassifier& g, const FusedVector& z, int y,
                      MetaClassifier& grads, std::array<double, 4>* d_input = nullptr);

/// dp_high / dz for the 4 fused inputs.
std::array<double, 4> meta_input_gradient(const MetaClassifier& g, const FusedVector& z);

struct FusionTrainParams {
    int epochs = 150;
    double lr = 1e-2;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
};

struct FusionCurvePoint {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
};

/// Full-batch AdamW on the precomputed fused vectors. The streams are not
/// touched: only the meta-classifier trains.
std::vector<FusionCurvePoint> train_fusion(MetaClassifier& g,
                                           const std::vector<FusedVector>& inputs,
                                           const std::vector<int>& labels,
                                           const FusionTrainParams& params);

struct Prediction {
    core::RiskLabel label = core::RiskLabel::LowRisk;
    double p_high = 0.0;
    FusedVector fused_input;
};

/// The trained artifact bundle: preprocessing stats, both streams, the
/// meta-classifier, and the config/seed that produced them.
struct Pipeline {
    core::RunConfig config;
    ingest::Imputer imputer;
    ingest::StandardizationStats standardizer;
    tabular::ForestModel forest;
    text::Vocabulary vocabulary;
    text::TextEncoderModel encoder;
    std::optional<text::TfidfVectorizer> tfidf;  // present when rf feeds on TF-IDF too
    MetaClassifier meta;
    std::vector<text::EpochRecord> text_curve;
    std::vector<FusionCurvePoint> fusion_curve;

    /// Throws naming the first missing component.
    void validate() const;
};

/// Trains streams and fusion on the given rows. A seeded slice of the rows
/// (config.fusion.holdout_fraction) is withheld from stream training and
/// used to fit the meta-classifier on stream outputs it has not memorized.
Pipeline train_pipeline(const core::Dataset& ds, const std::vector<std::size_t>& train_rows,
                        const core::RunConfig& config);

core::StreamOutput stream_outputs(const Pipeline& p, const core::Observation& obs);

Prediction predict(const Pipeline& p, const core::Observation& obs);
std::vector<Prediction> predict_batch(const Pipeline& p, const core::Dataset& ds,
                                      const std::vector<std::size_t>& rows);

/// p_high with the standardized numeric vector overridden and the text
/// stream output fixed; the interpretability surface.
double p_high_given(const Pipeline& p, const std::vector<double>& x_std,
                    const std::array<double, 2>& text_logits,
                    const std::vector<double>* tfidf_dense = nullptr);

std::string digest(const MetaClassifier& g);

void to_json(nlohmann::json& j, const MetaClassifier& g);
void from_json(const nlohmann::json& j, MetaClassifier& g);
void to_json(nlohmann::json& j, const Pipeline& p);
void from_json(const nlohmann::json& j, Pipeline& p);

void save_pipeline(const Pipeline& p, const std::string& path);
Pipeline load_pipeline(const std::string& path);

}  // namespace windfuse::fusion
