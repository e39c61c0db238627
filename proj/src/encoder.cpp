#include "windfuse/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "windfuse/util/common.hpp"
#include "windfuse/util/rng.hpp"

namespace windfuse::text {

namespace {

constexpr double kLnEps = 1e-8;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599344;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_deriv(double x) {
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * std::exp(-0.5 * x * x) * kInvSqrt2Pi;
}

Eigen::MatrixXd gaussian_matrix(util::Rng& rng, Eigen::Index rows, Eigen::Index cols,
                                double stddev) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.gaussian(0.0, stddev);
    }
    return m;
}

struct LayerCache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd q, k, v;
    std::vector<Eigen::MatrixXd> attn;  // per-head attention weights, L x L
    Eigen::MatrixXd ctx;                // concatenated head outputs, pre-projection
    Eigen::MatrixXd n1;                 // LayerNorm 1 pre-affine normalized values
    Eigen::VectorXd inv_sigma1;
    Eigen::MatrixXd y1;
    Eigen::MatrixXd h_pre;  // feed-forward pre-activation
    Eigen::MatrixXd g;      // gelu(h_pre)
    Eigen::MatrixXd n2;
    Eigen::VectorXd inv_sigma2;
    Eigen::MatrixXd y2;
};

struct ForwardCache {
    std::size_t valid_len = 0;
    Eigen::MatrixXd x0;
    std::vector<LayerCache> layers;
    Eigen::Vector2d probs;
    Eigen::Vector2d logits;
};

// Row-wise layer norm: returns post-affine output, stores pre-affine
// normalized rows and 1/sigma for the backward pass.
Eigen::MatrixXd layernorm_forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& gamma,
                                  const Eigen::MatrixXd& beta, Eigen::MatrixXd& n_out,
                                  Eigen::VectorXd& inv_sigma_out) {
    const Eigen::Index rows = x.rows();
    const Eigen::Index cols = x.cols();
    n_out.resize(rows, cols);
    inv_sigma_out.resize(rows);
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double mean = x.row(i).mean();
        double var = 0.0;
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double d = x(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        const double inv_sigma = 1.0 / std::sqrt(var + kLnEps);
        inv_sigma_out(i) = inv_sigma;
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double n = (x(i, j) - mean) * inv_sigma;
            n_out(i, j) = n;
            out(i, j) = n * gamma(0, j) + beta(0, j);
        }
    }
    return out;
}

Eigen::MatrixXd layernorm_backward(const Eigen::MatrixXd& d_out, const Eigen::MatrixXd& n,
                                   const Eigen::VectorXd& inv_sigma,
                                   const Eigen::MatrixXd& gamma, Eigen::MatrixXd& d_gamma,
                                   Eigen::MatrixXd& d_beta) {
    const Eigen::Index rows = d_out.rows();
    const Eigen::Index cols = d_out.cols();
    Eigen::MatrixXd dx(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        double mean_dn = 0.0;
        double mean_dn_n = 0.0;
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double dn = d_out(i, j) * gamma(0, j);
            mean_dn += dn;
            mean_dn_n += dn * n(i, j);
            d_gamma(0, j) += d_out(i, j) * n(i, j);
            d_beta(0, j) += d_out(i, j);
        }
        mean_dn /= static_cast<double>(cols);
        mean_dn_n /= static_cast<double>(cols);
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double dn = d_out(i, j) * gamma(0, j);
            dx(i, j) = inv_sigma(i) * (dn - mean_dn - n(i, j) * mean_dn_n);
        }
    }
    return dx;
}

void forward_cached(const TextEncoderModel& model, const std::vector<int>& ids,
                    std::size_t valid_len, ForwardCache& cache) {
    const Eigen::Index len = static_cast<Eigen::Index>(ids.size());
    const Eigen::Index d = model.cfg.d_model;
    const int heads = model.cfg.n_heads;
    const Eigen::Index dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    const Eigen::Index valid = static_cast<Eigen::Index>(valid_len);

    cache.valid_len = valid_len;
    cache.x0.resize(len, d);
    for (Eigen::Index i = 0; i < len; ++i) {
        cache.x0.row(i) = model.tok_emb.row(ids[static_cast<std::size_t>(i)]) + model.pos_emb.row(i);
    }

    cache.layers.assign(static_cast<std::size_t>(model.cfg.n_layers), LayerCache{});
    Eigen::MatrixXd x = cache.x0;
    for (int l = 0; l < model.cfg.n_layers; ++l) {
        const EncoderLayer& layer = model.layers[static_cast<std::size_t>(l)];
        LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
        lc.input = x;

        lc.q = x * layer.wq;
        lc.q.rowwise() += layer.bq.row(0);
        lc.k = x * layer.wk;
        lc.k.rowwise() += layer.bk.row(0);
        lc.v = x * layer.wv;
        lc.v.rowwise() += layer.bv.row(0);

        lc.attn.assign(static_cast<std::size_t>(heads), Eigen::MatrixXd());
        lc.ctx.resize(len, d);
        for (int h = 0; h < heads; ++h) {
            const auto qh = lc.q.middleCols(h * dh, dh);
            const auto kh = lc.k.middleCols(h * dh, dh);
            const auto vh = lc.v.middleCols(h * dh, dh);
            Eigen::MatrixXd scores = (qh * kh.transpose()) * inv_sqrt_dh;
            Eigen::MatrixXd& a = lc.attn[static_cast<std::size_t>(h)];
            a = Eigen::MatrixXd::Zero(len, len);
            for (Eigen::Index i = 0; i < len; ++i) {
                double maxv = scores(i, 0);
                for (Eigen::Index j = 1; j < valid; ++j) maxv = std::max(maxv, scores(i, j));
                double denom = 0.0;
                for (Eigen::Index j = 0; j < valid; ++j) {
                    const double e = std::exp(scores(i, j) - maxv);
                    a(i, j) = e;
                    denom += e;
                }
                for (Eigen::Index j = 0; j < valid; ++j) a(i, j) /= denom;
            }
            lc.ctx.middleCols(h * dh, dh) = a * vh;
        }

        Eigen::MatrixXd o = lc.ctx * layer.wo;
        o.rowwise() += layer.bo.row(0);
        lc.y1 = layernorm_forward(x + o, layer.ln1_gamma, layer.ln1_beta, lc.n1, lc.inv_sigma1);

        lc.h_pre = lc.y1 * layer.w1;
        lc.h_pre.rowwise() += layer.b1.row(0);
        lc.g = lc.h_pre.unaryExpr([](double v) { return gelu(v); });
        Eigen::MatrixXd f = lc.g * layer.w2;
        f.rowwise() += layer.b2.row(0);
        lc.y2 =
            layernorm_forward(lc.y1 + f, layer.ln2_gamma, layer.ln2_beta, lc.n2, lc.inv_sigma2);
        x = lc.y2;
    }

    Eigen::RowVector2d logits = x.row(0) * model.w_head + model.b_head.row(0);
    cache.logits = logits.transpose();
    const double maxv = std::max(logits(0), logits(1));
    const double e0 = std::exp(logits(0) - maxv);
    const double e1 = std::exp(logits(1) - maxv);
    cache.probs = Eigen::Vector2d(e0 / (e0 + e1), e1 / (e0 + e1));
}

void backward_cached(const TextEncoderModel& model, const std::vector<int>& ids,
                     const ForwardCache& cache, const Eigen::Vector2d& d_logits,
                     EncoderGrads& grads) {
    const Eigen::Index len = static_cast<Eigen::Index>(ids.size());
    const Eigen::Index d = model.cfg.d_model;
    const int heads = model.cfg.n_heads;
    const Eigen::Index dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    TextEncoderModel& g = grads.shape;

    const Eigen::MatrixXd& final_out = cache.layers.empty() ? cache.x0 : cache.layers.back().y2;
    g.w_head += final_out.row(0).transpose() * d_logits.transpose();
    g.b_head.row(0) += d_logits.transpose();

    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(len, d);
    dx.row(0) = (model.w_head * d_logits).transpose();

    for (int l = model.cfg.n_layers - 1; l >= 0; --l) {
        const EncoderLayer& layer = model.layers[static_cast<std::size_t>(l)];
        const LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
        EncoderLayer& gl = g.layers[static_cast<std::size_t>(l)];

        // LayerNorm 2 and the feed-forward block
        Eigen::MatrixXd d_r2 = layernorm_backward(dx, lc.n2, lc.inv_sigma2, layer.ln2_gamma,
                                                  gl.ln2_gamma, gl.ln2_beta);
        Eigen::MatrixXd d_y1 = d_r2;
        gl.w2 += lc.g.transpose() * d_r2;
        gl.b2.row(0) += d_r2.colwise().sum();
        Eigen::MatrixXd d_g = d_r2 * layer.w2.transpose();
        Eigen::MatrixXd d_h = d_g.cwiseProduct(
            lc.h_pre.unaryExpr([](double v) { return gelu_deriv(v); }));
        gl.w1 += lc.y1.transpose() * d_h;
        gl.b1.row(0) += d_h.colwise().sum();
        d_y1 += d_h * layer.w1.transpose();

        // LayerNorm 1 and the attention block
        Eigen::MatrixXd d_r1 = layernorm_backward(d_y1, lc.n1, lc.inv_sigma1, layer.ln1_gamma,
                                                  gl.ln1_gamma, gl.ln1_beta);
        Eigen::MatrixXd d_s = d_r1;
        gl.wo += lc.ctx.transpose() * d_r1;
        gl.bo.row(0) += d_r1.colwise().sum();
        Eigen::MatrixXd d_ctx = d_r1 * layer.wo.transpose();

        Eigen::MatrixXd d_q(len, d), d_k(len, d), d_v(len, d);
        for (int h = 0; h < heads; ++h) {
            const auto d_ctx_h = d_ctx.middleCols(h * dh, dh);
            const Eigen::MatrixXd& a = lc.attn[static_cast<std::size_t>(h)];
            const auto qh = lc.q.middleCols(h * dh, dh);
            const auto kh = lc.k.middleCols(h * dh, dh);
            const auto vh = lc.v.middleCols(h * dh, dh);
            d_v.middleCols(h * dh, dh) = a.transpose() * d_ctx_h;
            Eigen::MatrixXd d_a = d_ctx_h * vh.transpose();
            // softmax backward; masked columns have a == 0 and stay zero
            Eigen::MatrixXd d_scores(len, len);
            for (Eigen::Index i = 0; i < len; ++i) {
                const double dot = d_a.row(i).cwiseProduct(a.row(i)).sum();
                d_scores.row(i) = a.row(i).cwiseProduct((d_a.row(i).array() - dot).matrix());
            }
            d_q.middleCols(h * dh, dh) = d_scores * kh * inv_sqrt_dh;
            d_k.middleCols(h * dh, dh) = d_scores.transpose() * qh * inv_sqrt_dh;
        }

        gl.wq += lc.input.transpose() * d_q;
        gl.bq.row(0) += d_q.colwise().sum();
        gl.wk += lc.input.transpose() * d_k;
        gl.bk.row(0) += d_k.colwise().sum();
        gl.wv += lc.input.transpose() * d_v;
        gl.bv.row(0) += d_v.colwise().sum();
        d_s += d_q * layer.wq.transpose() + d_k * layer.wk.transpose() + d_v * layer.wv.transpose();
        dx = std::move(d_s);
    }

    for (Eigen::Index i = 0; i < len; ++i) {
        g.tok_emb.row(ids[static_cast<std::size_t>(i)]) += dx.row(i);
        g.pos_emb.row(i) += dx.row(i);
    }
}

}  // namespace

void TextEncoderModel::for_each_param(
    const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn) {
    fn("tok_emb", tok_emb);
    fn("pos_emb", pos_emb);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        EncoderLayer& layer = layers[l];
        fn(p + "wq", layer.wq);
        fn(p + "bq", layer.bq);
        fn(p + "wk", layer.wk);
        fn(p + "bk", layer.bk);
        fn(p + "wv", layer.wv);
        fn(p + "bv", layer.bv);
        fn(p + "wo", layer.wo);
        fn(p + "bo", layer.bo);
        fn(p + "ln1_gamma", layer.ln1_gamma);
        fn(p + "ln1_beta", layer.ln1_beta);
        fn(p + "w1", layer.w1);
        fn(p + "b1", layer.b1);
        fn(p + "w2", layer.w2);
        fn(p + "b2", layer.b2);
        fn(p + "ln2_gamma", layer.ln2_gamma);
        fn(p + "ln2_beta", layer.ln2_beta);
    }
    fn("w_head", w_head);
    fn("b_head", b_head);
}

void TextEncoderModel::for_each_param(
    const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn) const {
    const_cast<TextEncoderModel*>(this)->for_each_param(
        [&](const std::string& name, Eigen::MatrixXd& m) { fn(name, m); });
}

TextEncoderModel init_encoder(const EncoderConfig& cfg, std::size_t vocab_size,
                              std::uint64_t seed) {
    if (cfg.d_model % cfg.n_heads != 0) {
        throw std::invalid_argument("d_model must be divisible by n_heads");
    }
    constexpr double kInitStd = 0.02;
    util::Rng rng(util::derive_seed(seed, 0xe4c0de));
    TextEncoderModel model;
    model.cfg = cfg;
    const Eigen::Index d = cfg.d_model;
    const Eigen::Index f = static_cast<Eigen::Index>(cfg.ff_mult) * d;
    model.tok_emb = gaussian_matrix(rng, static_cast<Eigen::Index>(vocab_size), d, kInitStd);
    model.pos_emb = gaussian_matrix(rng, cfg.max_positions, d, kInitStd);
    model.tok_emb.row(Vocabulary::kPad).setZero();
    model.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    for (auto& layer : model.layers) {
        layer.wq = gaussian_matrix(rng, d, d, kInitStd);
        layer.wk = gaussian_matrix(rng, d, d, kInitStd);
        layer.wv = gaussian_matrix(rng, d, d, kInitStd);
        layer.wo = gaussian_matrix(rng, d, d, kInitStd);
        layer.bq = Eigen::MatrixXd::Zero(1, d);
        layer.bk = Eigen::MatrixXd::Zero(1, d);
        layer.bv = Eigen::MatrixXd::Zero(1, d);
        layer.bo = Eigen::MatrixXd::Zero(1, d);
        layer.w1 = gaussian_matrix(rng, d, f, kInitStd);
        layer.b1 = Eigen::MatrixXd::Zero(1, f);
        layer.w2 = gaussian_matrix(rng, f, d, kInitStd);
        layer.b2 = Eigen::MatrixXd::Zero(1, d);
        layer.ln1_gamma = Eigen::MatrixXd::Ones(1, d);
        layer.ln1_beta = Eigen::MatrixXd::Zero(1, d);
        layer.ln2_gamma = Eigen::MatrixXd::Ones(1, d);
        layer.ln2_beta = Eigen::MatrixXd::Zero(1, d);
    }
    model.w_head = gaussian_matrix(rng, d, 2, kInitStd);
    model.b_head = Eigen::MatrixXd::Zero(1, 2);
    return model;
}

std::vector<int> encode_ids(const TextEncoderModel& model, const Vocabulary& vocab,
                            const std::vector<std::string>& tokens) {
    std::vector<int> ids;
    ids.reserve(std::min(tokens.size() + 1, static_cast<std::size_t>(model.cfg.max_positions)));
    ids.push_back(Vocabulary::kCls);
    for (const auto& token : tokens) {
        if (ids.size() >= static_cast<std::size_t>(model.cfg.max_positions)) break;
        ids.push_back(vocab.id_of(token));
    }
    return ids;
}

Eigen::Vector2d encoder_forward(const TextEncoderModel& model, const std::vector<int>& ids,
                                std::size_t valid_len) {
    if (!model.initialized()) throw std::runtime_error("encoder not initialized");
    if (ids.empty() || valid_len == 0 || valid_len > ids.size()) {
        throw std::invalid_argument("encoder_forward: bad sequence length");
    }
    ForwardCache cache;
    forward_cached(model, ids, valid_len, cache);
    return cache.logits;
}

Eigen::Vector2d encode(const TextEncoderModel& model, const Vocabulary& vocab,
                       const std::vector<std::string>& tokens) {
    return encoder_forward(model, encode_ids(model, vocab, tokens));
}

Eigen::MatrixXd encoder_hidden_states(const TextEncoderModel& model, const std::vector<int>& ids,
                                      std::size_t valid_len) {
    ForwardCache cache;
    forward_cached(model, ids, valid_len, cache);
    return cache.layers.empty() ? cache.x0 : cache.layers.back().y2;
}

void EncoderGrads::zero() {
    shape.for_each_param([](const std::string&, Eigen::MatrixXd& m) { m.setZero(); });
}

EncoderGrads make_grads(const TextEncoderModel& model) {
    EncoderGrads grads;
    grads.shape = model;
    grads.zero();
    return grads;
}

double encoder_loss_and_grad(const TextEncoderModel& model, const std::vector<int>& ids,
                             std::size_t valid_len, int label, EncoderGrads& grads) {
    ForwardCache cache;
    forward_cached(model, ids, valid_len, cache);
    const double p = std::max(cache.probs(label), 1e-300);
    Eigen::Vector2d d_logits = cache.probs;
    d_logits(label) -= 1.0;
    backward_cached(model, ids, cache, d_logits, grads);
    return -std::log(p);
}

namespace {

struct AdamState {
    TextEncoderModel m;
    TextEncoderModel v;
    int t = 0;
};

void adamw_step(TextEncoderModel& model, EncoderGrads& grads, AdamState& state,
                const TrainParams& params) {
    ++state.t;
    const double bc1 = 1.0 - std::pow(params.beta1, state.t);
    const double bc2 = 1.0 - std::pow(params.beta2, state.t);

    std::vector<Eigen::MatrixXd*> ps, gs, ms, vs;
    model.for_each_param([&](const std::string&, Eigen::MatrixXd& mat) { ps.push_back(&mat); });
    grads.shape.for_each_param([&](const std::string&, Eigen::MatrixXd& mat) { gs.push_back(&mat); });
    state.m.for_each_param([&](const std::string&, Eigen::MatrixXd& mat) { ms.push_back(&mat); });
    state.v.for_each_param([&](const std::string&, Eigen::MatrixXd& mat) { vs.push_back(&mat); });

    for (std::size_t i = 0; i < ps.size(); ++i) {
        auto& p = *ps[i];
        const auto& g = *gs[i];
        auto& m = *ms[i];
        auto& v = *vs[i];
        m = params.beta1 * m + (1.0 - params.beta1) * g;
        v = params.beta2 * v + (1.0 - params.beta2) * g.cwiseProduct(g);
        const Eigen::ArrayXXd m_hat = m.array() / bc1;
        const Eigen::ArrayXXd v_hat = v.array() / bc2;
        p.array() -= params.lr * (m_hat / (v_hat.sqrt() + params.eps) +
                                  params.weight_decay * p.array());
    }
}

struct EvalStats {
    double loss = 0.0;
    double acc = 0.0;
};

EvalStats evaluate_split(const TextEncoderModel& model,
                         const std::vector<std::vector<int>>& ids, const std::vector<int>& labels) {
    EvalStats stats;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ForwardCache cache;
        forward_cached(model, ids[i], ids[i].size(), cache);
        stats.loss += -std::log(std::max(cache.probs(labels[i]), 1e-300));
        const int pred = cache.probs(1) >= cache.probs(0) ? 1 : 0;
        if (pred == labels[i]) ++correct;
    }
    const double n = static_cast<double>(ids.size());
    stats.loss /= n;
    stats.acc = static_cast<double>(correct) / n;
    return stats;
}

}  // namespace

TrainResult train_encoder(TextEncoderModel& model, const Vocabulary& vocab,
                          const std::vector<std::vector<std::string>>& docs,
                          const std::vector<int>& labels, const TrainParams& params,
                          const std::vector<std::vector<std::string>>* val_docs,
                          const std::vector<int>* val_labels) {
    if (docs.size() != labels.size() || docs.empty()) {
        throw std::invalid_argument("train_encoder: docs/labels size mismatch");
    }
    bool has_low = false, has_high = false;
    for (const int y : labels) (y == 1 ? has_high : has_low) = true;
    if (!has_low || !has_high) {
        throw std::runtime_error("train_encoder: training labels contain a single class");
    }

    std::vector<std::vector<int>> ids(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) ids[i] = encode_ids(model, vocab, docs[i]);
    std::vector<std::vector<int>> val_ids;
    if (val_docs) {
        val_ids.resize(val_docs->size());
        for (std::size_t i = 0; i < val_docs->size(); ++i) {
            val_ids[i] = encode_ids(model, vocab, (*val_docs)[i]);
        }
    }

    TrainResult result;
    if (params.epochs <= 0) return result;

    AdamState state;
    state.m = model;
    state.v = model;
    state.m.for_each_param([](const std::string&, Eigen::MatrixXd& m) { m.setZero(); });
    state.v.for_each_param([](const std::string&, Eigen::MatrixXd& m) { m.setZero(); });

    const std::size_t batch_size =
        std::max<std::size_t>(1, static_cast<std::size_t>(params.batch_size));
    // one gradient slot per in-flight sample; reduced in sample order so the
    // result is independent of the thread schedule
    std::vector<EncoderGrads> slots;
    std::vector<double> slot_loss(batch_size, 0.0);
    std::vector<int> slot_correct(batch_size, 0);
    for (std::size_t i = 0; i < batch_size; ++i) slots.push_back(make_grads(model));
    EncoderGrads batch_grads = make_grads(model);

    util::Rng shuffle_rng(util::derive_seed(params.seed, 0x7a41));
    std::vector<std::size_t> order(docs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t epoch_correct = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t count = std::min(batch_size, order.size() - start);
            util::parallel_for(count, [&](std::size_t s) {
                const std::size_t sample = order[start + s];
                slots[s].zero();
                ForwardCache cache;
                forward_cached(model, ids[sample], ids[sample].size(), cache);
                slot_loss[s] = -std::log(std::max(cache.probs(labels[sample]), 1e-300));
                slot_correct[s] =
                    (cache.probs(1) >= cache.probs(0) ? 1 : 0) == labels[sample] ? 1 : 0;
                Eigen::Vector2d d_logits = cache.probs;
                d_logits(labels[sample]) -= 1.0;
                backward_cached(model, ids[sample], cache, d_logits, slots[s]);
            });
            batch_grads.zero();
            std::vector<Eigen::MatrixXd*> acc;
            batch_grads.shape.for_each_param(
                [&](const std::string&, Eigen::MatrixXd& m) { acc.push_back(&m); });
            for (std::size_t s = 0; s < count; ++s) {
                epoch_loss += slot_loss[s];
                epoch_correct += static_cast<std::size_t>(slot_correct[s]);
                std::size_t k = 0;
                slots[s].shape.for_each_param(
                    [&](const std::string&, Eigen::MatrixXd& m) { *acc[k++] += m; });
            }
            const double scale = 1.0 / static_cast<double>(count);
            for (auto* m : acc) *m *= scale;
            adamw_step(model, batch_grads, state, params);
        }
        EpochRecord record;
        record.epoch = epoch + 1;
        record.train_loss = epoch_loss / static_cast<double>(docs.size());
        record.train_acc = static_cast<double>(epoch_correct) / static_cast<double>(docs.size());
        if (!std::isfinite(record.train_loss)) {
            throw std::runtime_error("train_encoder: loss diverged at epoch " +
                                     std::to_string(epoch + 1));
        }
        if (val_docs && val_labels && !val_ids.empty()) {
            const EvalStats val = evaluate_split(model, val_ids, *val_labels);
            record.val_loss = val.loss;
            record.val_acc = val.acc;
        }
        result.curve.push_back(record);
    }
    return result;
}

std::string digest(const TextEncoderModel& model) {
    nlohmann::json j = model;
    return util::hex64(util::fnv1a64(j.dump()));
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    }
    return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw std::runtime_error("matrix payload size mismatch");
    }
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++];
    }
    return m;
}

}  // namespace

void to_json(nlohmann::json& j, const TextEncoderModel& m) {
    j = nlohmann::json::object();
    j["version"] = 1;
    j["config"] = {{"d_model", m.cfg.d_model},
                   {"n_heads", m.cfg.n_heads},
                   {"n_layers", m.cfg.n_layers},
                   {"ff_mult", m.cfg.ff_mult},
                   {"max_positions", m.cfg.max_positions}};
    nlohmann::json params = nlohmann::json::object();
    m.for_each_param([&](const std::string& name, const Eigen::MatrixXd& mat) {
        params[name] = matrix_to_json(mat);
    });
    j["params"] = params;
}

void from_json(const nlohmann::json& j, TextEncoderModel& m) {
    const auto& cfg = j.at("config");
    m.cfg.d_model = cfg.at("d_model").get<int>();
    m.cfg.n_heads = cfg.at("n_heads").get<int>();
    m.cfg.n_layers = cfg.at("n_layers").get<int>();
    m.cfg.ff_mult = cfg.at("ff_mult").get<int>();
    m.cfg.max_positions = cfg.at("max_positions").get<int>();
    const auto& params = j.at("params");
    m.layers.assign(static_cast<std::size_t>(m.cfg.n_layers), EncoderLayer{});
    m.for_each_param([&](const std::string& name, Eigen::MatrixXd& mat) {
        mat = matrix_from_json(params.at(name));
    });
}

}  // namespace windfuse::text
