#include "windfuse/core.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

#include "windfuse/util/common.hpp"

namespace windfuse::core {

const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "tmpf", "dwpf", "relh", "drct", "sknt", "gust"};
    return names;
}

int feature_index(const std::string& name) {
    const auto& names = feature_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

const std::optional<double>& Observation::feature(std::size_t idx) const {
    switch (idx) {
        case 0: return tmpf;
        case 1: return dwpf;
        case 2: return relh;
        case 3: return drct;
        case 4: return sknt;
        case 5: return gust;
        default: throw std::out_of_range("feature index out of range");
    }
}

std::optional<double>& Observation::feature(std::size_t idx) {
    return const_cast<std::optional<double>&>(
        static_cast<const Observation&>(*this).feature(idx));
}

std::vector<std::string> validate_observation(const Observation& obs) {
    std::vector<std::string> violations;
    if (obs.relh && (*obs.relh < 0.0 || *obs.relh > 100.0))
        violations.push_back("relh out of range [0,100]");
    if (obs.drct && (*obs.drct < 0.0 || *obs.drct > 360.0))
        violations.push_back("drct out of range [0,360]");
    if (obs.sknt && *obs.sknt < 0.0) violations.push_back("sknt negative");
    if (obs.gust && *obs.gust < 0.0) violations.push_back("gust negative");
    return violations;
}

LabelCounts label_counts(const Dataset& ds) {
    LabelCounts counts;
    for (std::size_t i = 0; i < ds.observations.size(); ++i) {
        const auto& label = ds.observations[i].label;
        if (!label) {
            throw std::runtime_error("unlabeled observation at index " + std::to_string(i));
        }
        if (*label == RiskLabel::HighRisk) {
            ++counts.high;
        } else {
            ++counts.low;
        }
    }
    return counts;
}

std::string label_token(RiskLabel label) {
    return label == RiskLabel::HighRisk ? "high" : "low";
}

namespace {

void put_opt(nlohmann::json& j, const char* key, const std::optional<double>& v) {
    if (v) {
        j[key] = *v;
    } else {
        j[key] = nullptr;
    }
}

std::optional<double> get_opt(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const Observation& obs) {
    j = nlohmann::json::object();
    j["station"] = obs.station;
    j["valid"] = obs.timestamp;
    put_opt(j, "tmpf", obs.tmpf);
    put_opt(j, "dwpf", obs.dwpf);
    put_opt(j, "relh", obs.relh);
    put_opt(j, "drct", obs.drct);
    put_opt(j, "sknt", obs.sknt);
    put_opt(j, "gust", obs.gust);
    j["narrative"] = obs.narrative;
    if (obs.label) {
        j["label"] = label_token(*obs.label);
    } else {
        j["label"] = nullptr;
    }
}

void from_json(const nlohmann::json& j, Observation& obs) {
    obs.station = j.at("station").get<std::string>();
    obs.timestamp = j.at("valid").get<std::string>();
    obs.tmpf = get_opt(j, "tmpf");
    obs.dwpf = get_opt(j, "dwpf");
    obs.relh = get_opt(j, "relh");
    obs.drct = get_opt(j, "drct");
    obs.sknt = get_opt(j, "sknt");
    obs.gust = get_opt(j, "gust");
    obs.narrative = j.at("narrative").get<std::string>();
    if (j.contains("label") && !j.at("label").is_null()) {
        const std::string token = util::to_lower(j.at("label").get<std::string>());
        if (token == "high") {
            obs.label = RiskLabel::HighRisk;
        } else if (token == "low") {
            obs.label = RiskLabel::LowRisk;
        } else {
            throw std::runtime_error("bad label token: " + token);
        }
    } else {
        obs.label = std::nullopt;
    }
}

void to_json(nlohmann::json& j, const Dataset& ds) {
    j = nlohmann::json::object();
    j["features"] = feature_names();
    j["observations"] = ds.observations;
}

void from_json(const nlohmann::json& j, Dataset& ds) {
    ds.observations = j.at("observations").get<std::vector<Observation>>();
}

void to_json(nlohmann::json& j, const RunConfig& cfg) {
    j = nlohmann::json{
        {"seed", cfg.seed},
        {"rf",
         {{"trees", cfg.rf.trees},
          {"max_depth", cfg.rf.max_depth},
          {"feature_subsample", cfg.rf.feature_subsample},
          {"bootstrap", cfg.rf.bootstrap},
          {"append_tfidf", cfg.rf.append_tfidf}}},
        {"text",
         {{"max_tokens", cfg.text.max_tokens},
          {"epochs", cfg.text.epochs},
          {"lr", cfg.text.lr},
          {"weight_decay", cfg.text.weight_decay},
          {"d_model", cfg.text.d_model},
          {"n_heads", cfg.text.n_heads},
          {"n_layers", cfg.text.n_layers},
          {"ff_mult", cfg.text.ff_mult},
          {"batch_size", cfg.text.batch_size},
          {"tfidf", {{"max_terms", cfg.text.tfidf.max_terms}, {"min_df", cfg.text.tfidf.min_df}}}}},
        {"fusion",
         {{"epochs", cfg.fusion.epochs},
          {"lr", cfg.fusion.lr},
          {"weight_decay", cfg.fusion.weight_decay},
          {"hidden", cfg.fusion.hidden},
          {"holdout_fraction", cfg.fusion.holdout_fraction}}},
        {"eval", {{"folds", cfg.eval.folds}, {"train_fraction", cfg.eval.train_fraction}}}};
}

void from_json(const nlohmann::json& j, RunConfig& cfg) {
    cfg.seed = j.at("seed").get<std::uint64_t>();
    const auto& rf = j.at("rf");
    cfg.rf.trees = rf.at("trees").get<int>();
    cfg.rf.max_depth = rf.at("max_depth").get<int>();
    cfg.rf.feature_subsample = rf.at("feature_subsample").get<int>();
    cfg.rf.bootstrap = rf.at("bootstrap").get<bool>();
    cfg.rf.append_tfidf = rf.at("append_tfidf").get<bool>();
    const auto& text = j.at("text");
    cfg.text.max_tokens = text.at("max_tokens").get<int>();
    cfg.text.epochs = text.at("epochs").get<int>();
    cfg.text.lr = text.at("lr").get<double>();
    cfg.text.weight_decay = text.at("weight_decay").get<double>();
    cfg.text.d_model = text.at("d_model").get<int>();
    cfg.text.n_heads = text.at("n_heads").get<int>();
    cfg.text.n_layers = text.at("n_layers").get<int>();
    cfg.text.ff_mult = text.at("ff_mult").get<int>();
    cfg.text.batch_size = text.at("batch_size").get<int>();
    cfg.text.tfidf.max_terms = text.at("tfidf").at("max_terms").get<int>();
    cfg.text.tfidf.min_df = text.at("tfidf").at("min_df").get<int>();
    const auto& fusion = j.at("fusion");
    cfg.fusion.epochs = fusion.at("epochs").get<int>();
    cfg.fusion.lr = fusion.at("lr").get<double>();
    cfg.fusion.weight_decay = fusion.at("weight_decay").get<double>();
    cfg.fusion.hidden = fusion.at("hidden").get<int>();
    cfg.fusion.holdout_fraction = fusion.at("holdout_fraction").get<double>();
    const auto& eval = j.at("eval");
    cfg.eval.folds = eval.at("folds").get<int>();
    cfg.eval.train_fraction = eval.at("train_fraction").get<double>();
}

}  // namespace windfuse::core
