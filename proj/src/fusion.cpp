#include "windfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "windfuse/util/common.hpp"
#include "windfuse/util/rng.hpp"

namespace windfuse::fusion {

FusedVector fuse(const std::array<double, 2>& z_rf, const std::array<double, 2>& z_text) {
    const double sum = z_rf[0] + z_rf[1];
    if (std::abs(sum - 1.0) > 1e-6 || z_rf[0] < -1e-12 || z_rf[1] < -1e-12) {
        throw std::invalid_argument("fuse: rf output is not a probability vector");
    }
    return FusedVector{{z_rf[0], z_rf[1], z_text[0], z_text[1]}};
}

MetaClassifier init_meta(int hidden, std::uint64_t seed) {
    util::Rng rng(util::derive_seed(seed, 0x3e7a));
    MetaClassifier g;
    g.w1.resize(hidden, 4);
    g.w2.resize(2, hidden);
    for (Eigen::Index r = 0; r < g.w1.rows(); ++r) {
        for (Eigen::Index c = 0; c < g.w1.cols(); ++c) g.w1(r, c) = rng.gaussian(0.0, 0.5);
    }
    for (Eigen::Index r = 0; r < g.w2.rows(); ++r) {
        for (Eigen::Index c = 0; c < g.w2.cols(); ++c) g.w2(r, c) = rng.gaussian(0.0, 0.5);
    }
    g.b1 = Eigen::VectorXd::Zero(hidden);
    g.b2 = Eigen::VectorXd::Zero(2);
    return g;
}

namespace {

struct MetaCache {
    Eigen::Vector4d z;
    Eigen::VectorXd pre;     // hidden pre-activation
    Eigen::VectorXd hidden;  // relu(pre)
    Eigen::Vector2d logits;
    Eigen::Vector2d probs;
};

MetaCache meta_forward_cached(const MetaClassifier& g, const FusedVector& z) {
    MetaCache cache;
    cache.z = Eigen::Vector4d(z.values[0], z.values[1], z.values[2], z.values[3]);
    cache.pre = g.w1 * cache.z + g.b1;
    cache.hidden = cache.pre.cwiseMax(0.0);
    cache.logits = g.w2 * cache.hidden + g.b2;
    const double maxv = cache.logits.maxCoeff();
    const double e0 = std::exp(cache.logits(0) - maxv);
    const double e1 = std::exp(cache.logits(1) - maxv);
    cache.probs = Eigen::Vector2d(e0 / (e0 + e1), e1 / (e0 + e1));
    return cache;
}

// Pushes dL/dlogits through the network, accumulating parameter gradients.
void meta_backward(const MetaClassifier& g, const MetaCache& cache,
                   const Eigen::Vector2d& d_logits, MetaClassifier& grads,
                   std::array<double, 4>* d_input) {
    grads.w2 += d_logits * cache.hidden.transpose();
    grads.b2 += d_logits;
    Eigen::VectorXd d_hidden = g.w2.transpose() * d_logits;
    for (Eigen::Index i = 0; i < d_hidden.size(); ++i) {
        if (cache.pre(i) <= 0.0) d_hidden(i) = 0.0;
    }
    grads.w1 += d_hidden * cache.z.transpose();
    grads.b1 += d_hidden;
    if (d_input) {
        const Eigen::Vector4d dz = g.w1.transpose() * d_hidden;
        for (int i = 0; i < 4; ++i) (*d_input)[static_cast<std::size_t>(i)] = dz(i);
    }
}

MetaClassifier zero_like(const MetaClassifier& g) {
    MetaClassifier z;
    z.w1 = Eigen::MatrixXd::Zero(g.w1.rows(), g.w1.cols());
    z.b1 = Eigen::VectorXd::Zero(g.b1.size());
    z.w2 = Eigen::MatrixXd::Zero(g.w2.rows(), g.w2.cols());
    z.b2 = Eigen::VectorXd::Zero(g.b2.size());
    return z;
}

}  // namespace

MetaOutput meta_forward(const MetaClassifier& g, const FusedVector& z) {
    const MetaCache cache = meta_forward_cached(g, z);
    return MetaOutput{{cache.logits(0), cache.logits(1)}, cache.probs(1)};
}

double cross_entropy(double p_high, int y) {
    const double p = std::clamp(p_high, 1e-12, 1.0 - 1e-12);
    return -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
}

double meta_loss_grad(const MetaClassifier& g, const FusedVector& z, int y,
                      MetaClassifier& grads, std::array<double, 4>* d_input) {
    const MetaCache cache = meta_forward_cached(g, z);
    Eigen::Vector2d d_logits = cache.probs;
    d_logits(y) -= 1.0;
    meta_backward(g, cache, d_logits, grads, d_input);
    return cross_entropy(cache.probs(1), y);
}

std::array<double, 4> meta_input_gradient(const MetaClassifier& g, const FusedVector& z) {
    const MetaCache cache = meta_forward_cached(g, z);
    // d p_high / d logits for a two-way softmax
    const double s = cache.probs(0) * cache.probs(1);
    const Eigen::Vector2d d_logits(-s, s);
    MetaClassifier scratch = zero_like(g);
    std::array<double, 4> d_input{};
    meta_backward(g, cache, d_logits, scratch, &d_input);
    return d_input;
}

std::vector<FusionCurvePoint> train_fusion(MetaClassifier& g,
                                           const std::vector<FusedVector>& inputs,
                                           const std::vector<int>& labels,
                                           const FusionTrainParams& params) {
    if (inputs.size() != labels.size() || inputs.empty()) {
        throw std::invalid_argument("train_fusion: inputs/labels size mismatch");
    }
    std::vector<FusionCurvePoint> curve;
    if (params.epochs <= 0) return curve;

    MetaClassifier m = zero_like(g);
    MetaClassifier v = zero_like(g);
    const double n = static_cast<double>(inputs.size());

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        MetaClassifier grads = zero_like(g);
        double loss = 0.0;
        std::size_t correct = 0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            const MetaCache cache = meta_forward_cached(g, inputs[i]);
            Eigen::Vector2d d_logits = cache.probs;
            d_logits(labels[i]) -= 1.0;
            meta_backward(g, cache, d_logits, grads, nullptr);
            loss += cross_entropy(cache.probs(1), labels[i]);
            const int pred = cache.probs(1) >= 0.5 ? 1 : 0;
            if (pred == labels[i]) ++correct;
        }
        grads.w1 /= n;
        grads.b1 /= n;
        grads.w2 /= n;
        grads.b2 /= n;

        const int t = epoch + 1;
        const double bc1 = 1.0 - std::pow(params.beta1, t);
        const double bc2 = 1.0 - std::pow(params.beta2, t);
        auto step = [&](Eigen::MatrixXd& p, Eigen::MatrixXd& m_s, Eigen::MatrixXd& v_s,
                        const Eigen::MatrixXd& grad) {
            m_s = params.beta1 * m_s + (1.0 - params.beta1) * grad;
            v_s = params.beta2 * v_s + (1.0 - params.beta2) * grad.cwiseProduct(grad);
            p.array() -= params.lr * ((m_s.array() / bc1) / ((v_s.array() / bc2).sqrt() + params.eps) +
                                      params.weight_decay * p.array());
        };
        auto step_vec = [&](Eigen::VectorXd& p, Eigen::VectorXd& m_s, Eigen::VectorXd& v_s,
                            const Eigen::VectorXd& grad) {
            m_s = params.beta1 * m_s + (1.0 - params.beta1) * grad;
            v_s = params.beta2 * v_s + (1.0 - params.beta2) * grad.cwiseProduct(grad);
            p.array() -= params.lr * ((m_s.array() / bc1) / ((v_s.array() / bc2).sqrt() + params.eps) +
                                      params.weight_decay * p.array());
        };
        step(g.w1, m.w1, v.w1, grads.w1);
        step_vec(g.b1, m.b1, v.b1, grads.b1);
        step(g.w2, m.w2, v.w2, grads.w2);
        step_vec(g.b2, m.b2, v.b2, grads.b2);

        FusionCurvePoint point;
        point.epoch = t;
        point.train_loss = loss / n;
        point.train_acc = static_cast<double>(correct) / n;
        if (!std::isfinite(point.train_loss)) {
            throw std::runtime_error("train_fusion: loss diverged at epoch " + std::to_string(t));
        }
        curve.push_back(point);
    }
    return curve;
}

void Pipeline::validate() const {
    if (imputer.fitted_on == 0) throw std::runtime_error("pipeline missing component: imputer");
    if (standardizer.fitted_on == 0) {
        throw std::runtime_error("pipeline missing component: standardizer");
    }
    if (!forest.fitted()) throw std::runtime_error("pipeline missing component: forest");
    if (vocabulary.size() < 3) throw std::runtime_error("pipeline missing component: vocabulary");
    if (!encoder.initialized()) throw std::runtime_error("pipeline missing component: encoder");
    if (!meta.initialized()) {
        throw std::runtime_error("pipeline missing component: meta-classifier");
    }
    if (config.rf.append_tfidf && !tfidf) {
        throw std::runtime_error("pipeline missing component: tfidf vectorizer");
    }
}

namespace {

std::vector<int> labels_of(const core::Dataset& ds, const std::vector<std::size_t>& rows) {
    std::vector<int> y;
    y.reserve(rows.size());
    for (const std::size_t r : rows) {
        const auto& label = ds.observations.at(r).label;
        if (!label) {
            throw std::runtime_error("unlabeled observation at index " + std::to_string(r));
        }
        y.push_back(static_cast<int>(*label));
    }
    return y;
}

// Stratified stream/fusion partition of the training rows.
void split_for_fusion(const std::vector<std::size_t>& rows, const std::vector<int>& y,
                      double holdout_fraction, std::uint64_t seed,
                      std::vector<std::size_t>& stream_rows,
                      std::vector<std::size_t>& fusion_rows) {
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        by_class[static_cast<std::size_t>(y[i])].push_back(rows[i]);
    }
    util::Rng rng(util::derive_seed(seed, 0xf0a9));
    stream_rows.clear();
    fusion_rows.clear();
    bool degenerate = false;
    for (auto& members : by_class) {
        rng.shuffle(members);
        const std::size_t k = static_cast<std::size_t>(
            std::llround(static_cast<double>(members.size()) * holdout_fraction));
        if (!members.empty() && (k == 0 || k >= members.size())) degenerate = true;
        for (std::size_t i = 0; i < members.size(); ++i) {
            (i < k ? fusion_rows : stream_rows).push_back(members[i]);
        }
    }
    // tiny inputs: train both stages on everything rather than starve one
    if (degenerate || fusion_rows.empty() || stream_rows.size() < 2) {
        stream_rows.assign(rows.begin(), rows.end());
        fusion_rows.assign(rows.begin(), rows.end());
    }
    std::sort(stream_rows.begin(), stream_rows.end());
    std::sort(fusion_rows.begin(), fusion_rows.end());
}

std::vector<std::vector<std::string>> tokenized_narratives(const core::Dataset& ds,
                                                           const std::vector<std::size_t>& rows) {
    std::vector<std::vector<std::string>> docs;
    docs.reserve(rows.size());
    for (const std::size_t r : rows) docs.push_back(text::tokenize(ds.observations[r].narrative));
    return docs;
}

std::vector<double> forest_input(const Pipeline& p, const std::vector<double>& x_std,
                                 const std::vector<double>* tfidf_dense) {
    if (!p.config.rf.append_tfidf) return x_std;
    std::vector<double> x = x_std;
    if (tfidf_dense) {
        x.insert(x.end(), tfidf_dense->begin(), tfidf_dense->end());
    } else {
        x.resize(x.size() + p.tfidf->size(), 0.0);
    }
    return x;
}

}  // namespace

Pipeline train_pipeline(const core::Dataset& ds, const std::vector<std::size_t>& train_rows,
                        const core::RunConfig& config) {
    if (train_rows.size() < 2) throw std::invalid_argument("train_pipeline: too few rows");
    Pipeline p;
    p.config = config;

    const std::vector<int> y_all = labels_of(ds, train_rows);
    std::vector<std::size_t> stream_rows, fusion_rows;
    split_for_fusion(train_rows, y_all, config.fusion.holdout_fraction, config.seed, stream_rows,
                     fusion_rows);

    // preprocessing statistics come from training rows only
    p.imputer = ingest::fit_imputer(ds, train_rows);
    const core::Dataset imputed_stream = ingest::impute(ds, stream_rows, p.imputer);
    std::vector<std::size_t> all_imputed(train_rows.size());
    std::iota(all_imputed.begin(), all_imputed.end(), std::size_t{0});
    const core::Dataset imputed_all = ingest::impute(ds, train_rows, p.imputer);
    p.standardizer = ingest::fit_standardizer(imputed_all, all_imputed);

    std::vector<std::size_t> stream_local(stream_rows.size());
    std::iota(stream_local.begin(), stream_local.end(), std::size_t{0});
    tabular::Matrix x_stream =
        ingest::apply_standardizer(p.standardizer, imputed_stream, stream_local);
    const std::vector<int> y_stream = labels_of(ds, stream_rows);

    const auto stream_docs = tokenized_narratives(ds, stream_rows);
    if (config.rf.append_tfidf) {
        p.tfidf = text::fit_tfidf(stream_docs, config.text.tfidf.max_terms,
                                  config.text.tfidf.min_df);
        for (std::size_t i = 0; i < x_stream.size(); ++i) {
            const auto dense = text::tfidf_transform_dense(*p.tfidf, stream_docs[i]);
            x_stream[i].insert(x_stream[i].end(), dense.begin(), dense.end());
        }
    }

    tabular::ForestParams forest_params;
    forest_params.n_trees = config.rf.trees;
    forest_params.max_depth = config.rf.max_depth;
    forest_params.feature_subsample = config.rf.feature_subsample;
    forest_params.bootstrap = config.rf.bootstrap;
    p.forest = tabular::fit_forest(x_stream, y_stream, forest_params,
                                   util::derive_seed(config.seed, 0xf02e57));

    p.vocabulary = text::build_vocabulary(stream_docs);
    text::EncoderConfig enc_cfg;
    enc_cfg.d_model = config.text.d_model;
    enc_cfg.n_heads = config.text.n_heads;
    enc_cfg.n_layers = config.text.n_layers;
    enc_cfg.ff_mult = config.text.ff_mult;
    enc_cfg.max_positions = config.text.max_tokens;
    p.encoder = text::init_encoder(enc_cfg, p.vocabulary.size(),
                                   util::derive_seed(config.seed, 0x7e47));

    text::TrainParams text_params;
    text_params.epochs = config.text.epochs;
    text_params.lr = config.text.lr;
    text_params.weight_decay = config.text.weight_decay;
    text_params.batch_size = config.text.batch_size;
    text_params.seed = util::derive_seed(config.seed, 0x7e47a1);
    const auto fusion_docs = tokenized_narratives(ds, fusion_rows);
    const std::vector<int> y_fusion = labels_of(ds, fusion_rows);
    const auto text_result = text::train_encoder(p.encoder, p.vocabulary, stream_docs, y_stream,
                                                 text_params, &fusion_docs, &y_fusion);
    p.text_curve = text_result.curve;

    // fused vectors on the held-out rows, streams frozen from here on
    std::vector<FusedVector> fused;
    fused.reserve(fusion_rows.size());
    for (std::size_t i = 0; i < fusion_rows.size(); ++i) {
        const auto& obs = ds.observations[fusion_rows[i]];
        const auto x_std = ingest::standardize_row(p.standardizer, obs, p.imputer);
        std::vector<double> x = x_std;
        if (config.rf.append_tfidf) {
            const auto dense = text::tfidf_transform_dense(*p.tfidf, fusion_docs[i]);
            x.insert(x.end(), dense.begin(), dense.end());
        }
        const auto z_rf = tabular::forest_predict_proba(p.forest, x);
        const Eigen::Vector2d z_text = text::encode(p.encoder, p.vocabulary, fusion_docs[i]);
        fused.push_back(fuse(z_rf, {z_text(0), z_text(1)}));
    }

    p.meta = init_meta(config.fusion.hidden, util::derive_seed(config.seed, 0x3e7a11));
    FusionTrainParams fusion_params;
    fusion_params.epochs = config.fusion.epochs;
    fusion_params.lr = config.fusion.lr;
    fusion_params.weight_decay = config.fusion.weight_decay;
    fusion_params.seed = util::derive_seed(config.seed, 0x3e7a12);
    p.fusion_curve = train_fusion(p.meta, fused, y_fusion, fusion_params);
    return p;
}

core::StreamOutput stream_outputs(const Pipeline& p, const core::Observation& obs) {
    p.validate();
    const auto x_std = ingest::standardize_row(p.standardizer, obs, p.imputer);
    const auto doc = text::tokenize(obs.narrative);
    std::vector<double> x = x_std;
    if (p.config.rf.append_tfidf) {
        const auto dense = text::tfidf_transform_dense(*p.tfidf, doc);
        x.insert(x.end(), dense.begin(), dense.end());
    }
    core::StreamOutput out;
    out.rf_probs = tabular::forest_predict_proba(p.forest, x);
    const Eigen::Vector2d z_text = text::encode(p.encoder, p.vocabulary, doc);
    out.text_logits = {z_text(0), z_text(1)};
    return out;
}

Prediction predict(const Pipeline& p, const core::Observation& obs) {
    const core::StreamOutput streams = stream_outputs(p, obs);
    Prediction pred;
    pred.fused_input = fuse(streams.rf_probs, streams.text_logits);
    const MetaOutput out = meta_forward(p.meta, pred.fused_input);
    pred.p_high = out.p_high;
    pred.label = out.p_high >= 0.5 ? core::RiskLabel::HighRisk : core::RiskLabel::LowRisk;
    return pred;
}

std::vector<Prediction> predict_batch(const Pipeline& p, const core::Dataset& ds,
                                      const std::vector<std::size_t>& rows) {
    p.validate();
    std::vector<Prediction> out(rows.size());
    util::parallel_for(rows.size(), [&](std::size_t i) {
        out[i] = predict(p, ds.observations.at(rows[i]));
    });
    return out;
}

double p_high_given(const Pipeline& p, const std::vector<double>& x_std,
                    const std::array<double, 2>& text_logits,
                    const std::vector<double>* tfidf_dense) {
    const auto x = forest_input(p, x_std, tfidf_dense);
    const auto z_rf = tabular::forest_predict_proba(p.forest, x);
    return meta_forward(p.meta, fuse(z_rf, text_logits)).p_high;
}

std::string digest(const MetaClassifier& g) {
    nlohmann::json j = g;
    return util::hex64(util::fnv1a64(j.dump()));
}

namespace {

nlohmann::json eigen_to_json(const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    }
    return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd eigen_from_json(const nlohmann::json& j) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++];
    }
    return m;
}

}  // namespace

void to_json(nlohmann::json& j, const MetaClassifier& g) {
    j = nlohmann::json{{"version", 1},
                       {"w1", eigen_to_json(g.w1)},
                       {"b1", eigen_to_json(g.b1)},
                       {"w2", eigen_to_json(g.w2)},
                       {"b2", eigen_to_json(g.b2)}};
}

void from_json(const nlohmann::json& j, MetaClassifier& g) {
    g.w1 = eigen_from_json(j.at("w1"));
    g.b1 = eigen_from_json(j.at("b1"));
    g.w2 = eigen_from_json(j.at("w2"));
    g.b2 = eigen_from_json(j.at("b2"));
}

void to_json(nlohmann::json& j, const Pipeline& p) {
    j = nlohmann::json::object();
    j["format"] = "windfuse-pipeline";
    j["version"] = 1;
    j["config"] = p.config;
    j["imputer"] = p.imputer;
    j["standardizer"] = p.standardizer;
    j["forest"] = p.forest;
    j["vocabulary"] = p.vocabulary;
    j["encoder"] = p.encoder;
    if (p.tfidf) {
        j["tfidf"] = *p.tfidf;
    } else {
        j["tfidf"] = nullptr;
    }
    j["meta"] = p.meta;
}

void from_json(const nlohmann::json& j, Pipeline& p) {
    if (j.value("format", "") != "windfuse-pipeline") {
        throw std::runtime_error("not a windfuse pipeline bundle");
    }
    p.config = j.at("config").get<core::RunConfig>();
    p.imputer = j.at("imputer").get<ingest::Imputer>();
    p.standardizer = j.at("standardizer").get<ingest::StandardizationStats>();
    p.forest = j.at("forest").get<tabular::ForestModel>();
    p.vocabulary = j.at("vocabulary").get<text::Vocabulary>();
    p.encoder = j.at("encoder").get<text::TextEncoderModel>();
    if (j.contains("tfidf") && !j.at("tfidf").is_null()) {
        p.tfidf = j.at("tfidf").get<text::TfidfVectorizer>();
    } else {
        p.tfidf = std::nullopt;
    }
    p.meta = j.at("meta").get<MetaClassifier>();
}

void save_pipeline(const Pipeline& p, const std::string& path) {
    nlohmann::json j = p;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(1);
    out << "\n";
}

Pipeline load_pipeline(const std::string& path) {
    std::string resolved = path;
    if (std::filesystem::is_directory(path)) {
        resolved = (std::filesystem::path(path) / "model.json").string();
    }
    std::ifstream in(resolved, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + resolved);
    nlohmann::json j;
    in >> j;
    return j.get<Pipeline>();
}

}  // namespace windfuse::fusion
