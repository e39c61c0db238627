#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "windfuse/text.hpp"

namespace windfuse::text {

struct EncoderConfig {
    int d_model = 64;
    int n_heads = 4;
    int n_layers = 2;
    int ff_mult = 4;
    int max_positions = 128;
};

struct EncoderLayer {
    Eigen::MatrixXd wq, wk, wv, wo;  // d x d
    Eigen::MatrixXd bq, bk, bv, bo;  // 1 x d
    Eigen::MatrixXd w1, b1;          // d x f, 1 x f
    Eigen::MatrixXd w2, b2;          // f x d, 1 x d
    Eigen::MatrixXd ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;  // 1 x d
};

/// Desk-scale bidirectional encoder classifier: token + learned positional
/// embeddings, post-norm self-attention blocks with GELU feed-forward, and
/// a 2-way head on the CLS position.
struct TextEncoderModel {
    EncoderConfig cfg;
    Eigen::MatrixXd tok_emb;  // vocab x d
    Eigen::MatrixXd pos_emb;  // max_positions x d
    std::vector<EncoderLayer> layers;
    Eigen::MatrixXd w_head;  // d x 2
    Eigen::MatrixXd b_head;  // 1 x 2

    bool initialized() const { return tok_emb.size() > 0; }

    /// Visits every parameter tensor in a fixed order.
    void for_each_param(const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn);
    void for_each_param(
        const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn) const;
};

TextEncoderModel init_encoder(const EncoderConfig& cfg, std::size_t vocab_size,
                              std::uint64_t seed);

/// CLS-prefixed ids, UNK for out-of-vocabulary, truncated to max_positions.
std::vector<int> encode_ids(const TextEncoderModel& model, const Vocabulary& vocab,
                            const std::vector<std::string>& tokens);

/// Class logits [low, high] at the CLS position. Ids beyond valid_len are
/// masked out of attention (padding). valid_len <= ids.size().
Eigen::Vector2d encoder_forward(const TextEncoderModel& model, const std::vector<int>& ids,
                                std::size_t valid_len);

inline Eigen::Vector2d encoder_forward(const TextEncoderModel& model,
                                       const std::vector<int>& ids) {
    return encoder_forward(model, ids, ids.size());
}

/// Tokenize-map-truncate-forward in one step; z_text of the fused pair.
Eigen::Vector2d encode(const TextEncoderModel& model, const Vocabulary& vocab,
                       const std::vector<std::string>& tokens);

/// Final-layer hidden states (one row per position); inspection hook.
Eigen::MatrixXd encoder_hidden_states(const TextEncoderModel& model, const std::vector<int>& ids,
                                      std::size_t valid_len);

/// Gradient holder mirroring the model's parameter tensors.
struct EncoderGrads {
    TextEncoderModel shape;  // tensors reused as gradient storage
    void zero();
};

EncoderGrads make_grads(const TextEncoderModel& model);

/// Cross-entropy of the CLS logits against label (0/1); accumulates
/// parameter gradients. Returns the loss.
double encoder_loss_and_grad(const TextEncoderModel& model, const std::vector<int>& ids,
                             std::size_t valid_len, int label, EncoderGrads& grads);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    // negative when no validation set was supplied
    double val_loss = -1.0;
    double val_acc = -1.0;
};

struct TrainParams {
    int epochs = 150;
    double lr = 3e-5;
    double weight_decay = 0.01;
    int batch_size = 32;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
};

struct TrainResult {
    std::vector<EpochRecord> curve;
};

/// Mini-batch AdamW with decoupled weight decay. Deterministic per seed:
/// fixed shuffle, per-sample gradient slots reduced in sample order.
/// Throws on divergence to a non-finite loss, naming the epoch.
TrainResult train_encoder(TextEncoderModel& model, const Vocabulary& vocab,
                          const std::vector<std::vector<std::string>>& docs,
                          const std::vector<int>& labels, const TrainParams& params,
                          const std::vector<std::vector<std::string>>* val_docs = nullptr,
                          const std::vector<int>* val_labels = nullptr);

std::string digest(const TextEncoderModel& model);

void to_json(nlohmann::json& j, const TextEncoderModel& m);
void from_json(const nlohmann::json& j, TextEncoderModel& m);

}  // namespace windfuse::text
