#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "windfuse/fusion.hpp"
#include "windfuse/synth.hpp"
#include "windfuse/util/rng.hpp"

using namespace windfuse;

TEST_CASE("fuse concatenates in stream order") {
    const auto z = fusion::fuse({0.7, 0.3}, {1.2, -0.5});
    CHECK(z.values[0] == 0.7);
    CHECK(z.values[1] == 0.3);
    CHECK(z.values[2] == 1.2);
    CHECK(z.values[3] == -0.5);

    const auto saturated = fusion::fuse({1.0, 0.0}, {0.0, 0.0});
    CHECK(saturated.values[0] == 1.0);
    CHECK(saturated.values[3] == 0.0);
}

TEST_CASE("fuse rejects non-probability rf output") {
    CHECK_THROWS_AS(fusion::fuse({0.6, 0.6}, {0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(fusion::fuse({-0.1, 1.1}, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("meta_forward") {
    SUBCASE("all-zero network outputs one half") {
        fusion::MetaClassifier g;
        g.w1 = Eigen::MatrixXd::Zero(16, 4);
        g.b1 = Eigen::VectorXd::Zero(16);
        g.w2 = Eigen::MatrixXd::Zero(2, 16);
        g.b2 = Eigen::VectorXd::Zero(2);
        const auto out = fusion::meta_forward(g, fusion::fuse({0.7, 0.3}, {2.0, -2.0}));
        CHECK(out.logits[0] == 0.0);
        CHECK(out.logits[1] == 0.0);
        CHECK(out.p_high == doctest::Approx(0.5));
    }
    SUBCASE("softmax normalizes") {
        const auto g = fusion::init_meta(16, 99);
        const auto out = fusion::meta_forward(g, fusion::fuse({0.2, 0.8}, {0.3, 0.9}));
        const double p_low =
            std::exp(out.logits[0]) / (std::exp(out.logits[0]) + std::exp(out.logits[1]));
        CHECK(p_low + out.p_high == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("hand-set single-unit head is monotone in z_rf[high]") {
        // hidden unit reads coordinate 1 (rf high prob); head maps it to the
        // high logit
        fusion::MetaClassifier g;
        g.w1 = Eigen::MatrixXd::Zero(1, 4);
        g.w1(0, 1) = 4.0;
        g.b1 = Eigen::VectorXd::Zero(1);
        g.w2 = Eigen::MatrixXd::Zero(2, 1);
        g.w2(1, 0) = 2.0;
        g.b2 = Eigen::VectorXd::Zero(2);
        double prev = -1.0;
        for (int i = 0; i <= 10; ++i) {
            const double p_rf = static_cast<double>(i) / 10.0;
            const auto out = fusion::meta_forward(g, fusion::fuse({1.0 - p_rf, p_rf}, {0, 0}));
            CHECK(out.p_high > prev);
            prev = out.p_high;
        }
    }
}

TEST_CASE("cross_entropy") {
    CHECK(fusion::cross_entropy(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(fusion::cross_entropy(1.0 - 1e-13, 1) < 1e-10);
    CHECK(fusion::cross_entropy(0.9, 0) == doctest::Approx(2.302585092994046).epsilon(1e-9));
    // clamping keeps the loss finite at the boundaries
    CHECK(std::isfinite(fusion::cross_entropy(0.0, 1)));
    CHECK(std::isfinite(fusion::cross_entropy(1.0, 0)));
}

TEST_CASE("meta gradients match finite differences within 1e-6") {
    util::Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        auto g = fusion::init_meta(16, rng.bits());
        const double p0 = rng.uniform();
        fusion::FusedVector z =
            fusion::fuse({p0, 1.0 - p0}, {rng.gaussian(0, 2), rng.gaussian(0, 2)});
        const int label = rng.bernoulli(0.5) ? 1 : 0;

        auto grads = fusion::init_meta(16, 0);
        grads.w1.setZero();
        grads.b1.setZero();
        grads.w2.setZero();
        grads.b2.setZero();
        std::array<double, 4> d_input{};
        fusion::meta_loss_grad(g, z, label, grads, &d_input);

        const double h = 1e-6;
        auto loss_of = [&](const fusion::MetaClassifier& m) {
            return fusion::cross_entropy(fusion::meta_forward(m, z).p_high, label);
        };
        auto check_matrix = [&](Eigen::MatrixXd& p, const Eigen::MatrixXd& analytic) {
            for (Eigen::Index r = 0; r < p.rows(); ++r) {
                for (Eigen::Index c = 0; c < p.cols(); ++c) {
                    const double saved = p(r, c);
                    p(r, c) = saved + h;
                    const double up = loss_of(g);
                    p(r, c) = saved - h;
                    const double down = loss_of(g);
                    p(r, c) = saved;
                    CHECK(oracles::rel_err(analytic(r, c), (up - down) / (2 * h)) < 1e-6);
                }
            }
        };
        check_matrix(g.w1, grads.w1);
        check_matrix(g.w2, grads.w2);
        Eigen::MatrixXd b1 = g.b1, gb1 = grads.b1;
        for (Eigen::Index i = 0; i < g.b1.size(); ++i) {
            const double saved = g.b1(i);
            g.b1(i) = saved + h;
            const double up = loss_of(g);
            g.b1(i) = saved - h;
            const double down = loss_of(g);
            g.b1(i) = saved;
            CHECK(oracles::rel_err(grads.b1(i), (up - down) / (2 * h)) < 1e-6);
        }
        for (Eigen::Index i = 0; i < g.b2.size(); ++i) {
            const double saved = g.b2(i);
            g.b2(i) = saved + h;
            const double up = loss_of(g);
            g.b2(i) = saved - h;
            const double down = loss_of(g);
            g.b2(i) = saved;
            CHECK(oracles::rel_err(grads.b2(i), (up - down) / (2 * h)) < 1e-6);
        }
        // input gradient of the loss
        for (std::size_t i = 0; i < 4; ++i) {
            auto zp = z, zm = z;
            zp.values[i] += h;
            zm.values[i] -= h;
            const double up = fusion::cross_entropy(fusion::meta_forward(g, zp).p_high, label);
            const double down = fusion::cross_entropy(fusion::meta_forward(g, zm).p_high, label);
            CHECK(oracles::rel_err(d_input[i], (up - down) / (2 * h)) < 1e-6);
        }
    }
}

TEST_CASE("meta_input_gradient matches finite differences of p_high") {
    util::Rng rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = fusion::init_meta(16, rng.bits());
        const double p0 = rng.uniform();
        const fusion::FusedVector z =
            fusion::fuse({p0, 1.0 - p0}, {rng.gaussian(0, 2), rng.gaussian(0, 2)});
        const auto grad = fusion::meta_input_gradient(g, z);
        const double h = 1e-6;
        for (std::size_t i = 0; i < 4; ++i) {
            auto zp = z, zm = z;
            zp.values[i] += h;
            zm.values[i] -= h;
            const double fd = (fusion::meta_forward(g, zp).p_high -
                               fusion::meta_forward(g, zm).p_high) / (2 * h);
            CHECK(oracles::rel_err(grad[i], fd) < 1e-6);
        }
    }
}

TEST_CASE("train_fusion learns a separable gate and records curves") {
    util::Rng rng(3);
    std::vector<fusion::FusedVector> inputs;
    std::vector<int> labels;
    for (int i = 0; i < 200; ++i) {
        const int y = rng.bernoulli(0.5) ? 1 : 0;
        const double p_rf = y == 1 ? 0.9 : 0.1;
        inputs.push_back(fusion::fuse({1.0 - p_rf, p_rf},
                                      {rng.gaussian(0, 0.1), rng.gaussian(0, 0.1)}));
        labels.push_back(y);
    }
    auto g = fusion::init_meta(16, 5);
    fusion::FusionTrainParams params;
    params.epochs = 150;
    params.lr = 1e-2;
    const auto curve = fusion::train_fusion(g, inputs, labels, params);
    REQUIRE(curve.size() == 150);
    CHECK(curve.back().train_acc == doctest::Approx(1.0));
    CHECK(curve.back().train_loss < curve.front().train_loss);
}

TEST_CASE("train_fusion zero epochs leaves g unchanged") {
    auto g = fusion::init_meta(16, 5);
    const std::string before = fusion::digest(g);
    fusion::FusionTrainParams params;
    params.epochs = 0;
    const auto curve =
        fusion::train_fusion(g, {fusion::fuse({0.5, 0.5}, {0, 0})}, {1}, params);
    CHECK(curve.empty());
    CHECK(fusion::digest(g) == before);
}

namespace {

core::RunConfig tiny_config(std::uint64_t seed = 7) {
    core::RunConfig cfg;
    cfg.seed = seed;
    cfg.rf.trees = 15;
    cfg.rf.max_depth = 6;
    cfg.text.epochs = 4;
    cfg.text.lr = 1e-3;
    cfg.text.d_model = 16;
    cfg.text.n_heads = 2;
    cfg.text.n_layers = 1;
    cfg.text.batch_size = 16;
    cfg.text.max_tokens = 32;
    cfg.fusion.epochs = 120;
    cfg.fusion.lr = 1e-2;
    return cfg;
}

core::Dataset tiny_synth(std::size_t n, std::uint64_t seed) {
    synth::SynthSpec spec;
    spec.n = n;
    spec.seed = seed;
    spec.delta_num = 3.0;
    spec.delta_text = 0.9;
    return synth::generate(spec);
}

std::vector<std::size_t> iota_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

}  // namespace

TEST_CASE("train_pipeline leaves stream parameters frozen during fusion") {
    const auto ds = tiny_synth(160, 11);
    const auto cfg = tiny_config();
    auto pipeline = fusion::train_pipeline(ds, iota_rows(ds.size()), cfg);

    const std::string forest_digest = tabular::digest(pipeline.forest);
    const std::string encoder_digest = text::digest(pipeline.encoder);

    // retrain only the meta-classifier on fresh fused vectors
    std::vector<fusion::FusedVector> fused;
    std::vector<int> labels;
    for (std::size_t i = 0; i < 40; ++i) {
        const auto streams = fusion::stream_outputs(pipeline, ds.observations[i]);
        fused.push_back(fusion::fuse(streams.rf_probs, streams.text_logits));
        labels.push_back(static_cast<int>(*ds.observations[i].label));
    }
    fusion::FusionTrainParams params;
    params.epochs = 50;
    fusion::train_fusion(pipeline.meta, fused, labels, params);

    CHECK(tabular::digest(pipeline.forest) == forest_digest);
    CHECK(text::digest(pipeline.encoder) == encoder_digest);
}

TEST_CASE("predict contract") {
    const auto ds = tiny_synth(160, 13);
    const auto cfg = tiny_config();
    const auto pipeline = fusion::train_pipeline(ds, iota_rows(ds.size()), cfg);

    SUBCASE("valid prediction fields") {
        const auto pred = fusion::predict(pipeline, ds.observations[0]);
        CHECK(pred.p_high >= 0.0);
        CHECK(pred.p_high <= 1.0);
        CHECK((pred.label == core::RiskLabel::HighRisk) == (pred.p_high >= 0.5));
        CHECK(pred.fused_input.values[0] + pred.fused_input.values[1] ==
              doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("label equals the logit argmax away from the tie point") {
        for (std::size_t i = 0; i < 20; ++i) {
            const auto pred = fusion::predict(pipeline, ds.observations[i]);
            if (pred.p_high == 0.5) continue;
            const auto out = fusion::meta_forward(pipeline.meta, pred.fused_input);
            const bool argmax_high = out.logits[1] > out.logits[0];
            CHECK((pred.label == core::RiskLabel::HighRisk) == argmax_high);
        }
    }
    SUBCASE("empty narrative still predicts") {
        auto obs = ds.observations[0];
        obs.narrative.clear();
        const auto pred = fusion::predict(pipeline, obs);
        CHECK(std::isfinite(pred.p_high));
    }
    SUBCASE("missing numerics are mean-imputed") {
        auto obs = ds.observations[0];
        obs.sknt.reset();
        obs.tmpf.reset();
        const auto pred = fusion::predict(pipeline, obs);
        CHECK(std::isfinite(pred.p_high));
    }
    SUBCASE("batch preserves input order") {
        std::vector<std::size_t> rows{5, 3, 9, 0};
        const auto batch = fusion::predict_batch(pipeline, ds, rows);
        REQUIRE(batch.size() == 4);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto solo = fusion::predict(pipeline, ds.observations[rows[i]]);
            CHECK(batch[i].p_high == solo.p_high);
        }
    }
}

TEST_CASE("pipeline training is deterministic per seed") {
    const auto ds = tiny_synth(120, 17);
    const auto cfg = tiny_config(21);
    const auto a = fusion::train_pipeline(ds, iota_rows(ds.size()), cfg);
    const auto b = fusion::train_pipeline(ds, iota_rows(ds.size()), cfg);
    CHECK(tabular::digest(a.forest) == tabular::digest(b.forest));
    CHECK(text::digest(a.encoder) == text::digest(b.encoder));
    CHECK(fusion::digest(a.meta) == fusion::digest(b.meta));
    const auto pa = fusion::predict(a, ds.observations[3]);
    const auto pb = fusion::predict(b, ds.observations[3]);
    CHECK(pa.p_high == pb.p_high);
}

TEST_CASE("pipeline bundle round-trips through disk") {
    const auto ds = tiny_synth(120, 19);
    const auto cfg = tiny_config(23);
    const auto pipeline = fusion::train_pipeline(ds, iota_rows(ds.size()), cfg);
    const std::string path = (std::filesystem::temp_directory_path() / "wf_pipeline.json").string();
    fusion::save_pipeline(pipeline, path);
    const auto loaded = fusion::load_pipeline(path);
    CHECK(tabular::digest(loaded.forest) == tabular::digest(pipeline.forest));
    CHECK(text::digest(loaded.encoder) == text::digest(pipeline.encoder));
    CHECK(fusion::digest(loaded.meta) == fusion::digest(pipeline.meta));
    CHECK(loaded.config.seed == cfg.seed);
    for (int i = 0; i < 10; ++i) {
        const auto a = fusion::predict(pipeline, ds.observations[static_cast<std::size_t>(i)]);
        const auto b = fusion::predict(loaded, ds.observations[static_cast<std::size_t>(i)]);
        CHECK(a.p_high == b.p_high);
        CHECK(a.label == b.label);
    }
    std::filesystem::remove(path);
}

TEST_CASE("incomplete pipeline names the missing component") {
    fusion::Pipeline p;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("imputer"), std::runtime_error);
    p.imputer.fitted_on = 1;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("standardizer"), std::runtime_error);
    p.standardizer.fitted_on = 1;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("forest"), std::runtime_error);
}

TEST_CASE("rf_tfidf pipeline trains and predicts") {
    auto cfg = tiny_config(29);
    cfg.rf.append_tfidf = true;
    cfg.text.tfidf.min_df = 2;
    const auto ds = tiny_synth(120, 31);
    const auto pipeline = fusion::train_pipeline(ds, iota_rows(ds.size()), cfg);
    REQUIRE(pipeline.tfidf.has_value());
    CHECK(pipeline.forest.n_features >
          static_cast<int>(core::kFeatureCount));  // tfidf columns appended
    const auto pred = fusion::predict(pipeline, ds.observations[0]);
    CHECK(std::isfinite(pred.p_high));
}
