#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "windfuse/core.hpp"
#include "windfuse/util/rng.hpp"

using namespace windfuse;

namespace {

core::Observation valid_obs() {
    core::Observation obs;
    obs.station = "KSUX";
    obs.timestamp = "2023-05-01T12:00Z";
    obs.tmpf = 85.0;
    obs.dwpf = 60.0;
    obs.relh = 50.0;
    obs.drct = 180.0;
    obs.sknt = 10.0;
    obs.gust = 15.0;
    obs.narrative = "Extreme gusts caused significant property damage.";
    obs.label = core::RiskLabel::HighRisk;
    return obs;
}

}  // namespace

TEST_CASE("feature order is fixed") {
    const auto& names = core::feature_names();
    REQUIRE(names.size() == 6);
    CHECK(names[0] == "tmpf");
    CHECK(names[1] == "dwpf");
    CHECK(names[2] == "relh");
    CHECK(names[3] == "drct");
    CHECK(names[4] == "sknt");
    CHECK(names[5] == "gust");
    CHECK(core::feature_index("sknt") == 4);
    CHECK(core::feature_index("nope") == -1);
}

TEST_CASE("validate_observation") {
    CHECK(core::validate_observation(valid_obs()).empty());

    auto obs = valid_obs();
    obs.relh = 150.0;
    auto violations = core::validate_observation(obs);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0] == "relh out of range [0,100]");

    obs = valid_obs();
    obs.drct = -5.0;
    violations = core::validate_observation(obs);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0] == "drct out of range [0,360]");

    obs = valid_obs();
    obs.sknt = -1.0;
    obs.gust = -2.0;
    CHECK(core::validate_observation(obs).size() == 2);

    // missing values are legal, not zero
    obs = valid_obs();
    obs.relh.reset();
    CHECK(core::validate_observation(obs).empty());
}

TEST_CASE("label_counts") {
    core::Dataset ds;
    SUBCASE("empty dataset") {
        const auto counts = core::label_counts(ds);
        CHECK(counts.low == 0);
        CHECK(counts.high == 0);
    }
    SUBCASE("training-split shape") {
        // 5850 low / 2150 high, the training split composition
        for (int i = 0; i < 8000; ++i) {
            auto obs = valid_obs();
            obs.label = i < 5850 ? core::RiskLabel::LowRisk : core::RiskLabel::HighRisk;
            ds.observations.push_back(std::move(obs));
        }
        const auto counts = core::label_counts(ds);
        CHECK(counts.low == 5850);
        CHECK(counts.high == 2150);
        CHECK(counts.low + counts.high == ds.size());
    }
    SUBCASE("test-split shape") {
        for (int i = 0; i < 2000; ++i) {
            auto obs = valid_obs();
            obs.label = i < 1467 ? core::RiskLabel::LowRisk : core::RiskLabel::HighRisk;
            ds.observations.push_back(std::move(obs));
        }
        const auto counts = core::label_counts(ds);
        CHECK(counts.low == 1467);
        CHECK(counts.high == 533);
    }
    SUBCASE("unlabeled observation named by index") {
        ds.observations.push_back(valid_obs());
        auto obs = valid_obs();
        obs.label.reset();
        ds.observations.push_back(std::move(obs));
        CHECK_THROWS_WITH_AS(core::label_counts(ds), doctest::Contains("index 1"),
                             std::runtime_error);
    }
}

TEST_CASE("run config defaults mirror the published recipe") {
    const core::RunConfig cfg;
    CHECK(cfg.rf.trees == 100);
    CHECK(cfg.rf.max_depth == 12);
    CHECK(cfg.rf.feature_subsample == 0);  // auto: ceil(sqrt(6)) = 3
    CHECK(cfg.text.tfidf.max_terms == 1000);
    CHECK(cfg.text.tfidf.min_df == 5);
    CHECK(cfg.text.max_tokens == 128);
    CHECK(cfg.text.epochs == 150);
    CHECK(cfg.text.lr == 3e-5);
    CHECK(cfg.text.weight_decay == 0.01);
    CHECK(cfg.fusion.epochs == 150);
    CHECK(cfg.eval.folds == 5);
    // encoder stand-in shape
    CHECK(cfg.text.d_model == 64);
    CHECK(cfg.text.n_heads == 4);
    CHECK(cfg.text.n_layers == 2);
    CHECK(cfg.text.ff_mult == 4);
}

TEST_CASE("observation json round-trip preserves missingness") {
    util::Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        core::Observation obs = valid_obs();
        for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
            if (rng.bernoulli(0.4)) {
                obs.feature(f).reset();
            } else {
                obs.feature(f) = rng.gaussian(50.0, 20.0);
            }
        }
        if (rng.bernoulli(0.3)) obs.label.reset();
        if (rng.bernoulli(0.2)) obs.narrative.clear();

        const nlohmann::json j = obs;
        const auto back = j.get<core::Observation>();
        CHECK(back.station == obs.station);
        CHECK(back.timestamp == obs.timestamp);
        CHECK(back.narrative == obs.narrative);
        CHECK(back.label == obs.label);
        for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
            REQUIRE(back.feature(f).has_value() == obs.feature(f).has_value());
            if (obs.feature(f)) CHECK(*back.feature(f) == *obs.feature(f));
        }
    }
}

TEST_CASE("run config json round-trip") {
    core::RunConfig cfg;
    cfg.seed = 1234;
    cfg.rf.trees = 17;
    cfg.text.lr = 1e-3;
    cfg.fusion.holdout_fraction = 0.4;
    const nlohmann::json j = cfg;
    const auto back = j.get<core::RunConfig>();
    CHECK(back.seed == 1234);
    CHECK(back.rf.trees == 17);
    CHECK(back.text.lr == 1e-3);
    CHECK(back.fusion.holdout_fraction == 0.4);
}
