#include "windfuse/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "windfuse/util/common.hpp"
#include "windfuse/util/rng.hpp"

namespace windfuse::ingest {

namespace {

// One CSV record; quoted fields may contain commas, escaped quotes and
// newlines. Returns false at end of stream.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int c;
    while ((c = in.get()) != EOF) {
        any = true;
        const char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\r') {
            // swallow; handled with the following '\n'
        } else if (ch == '\n') {
            fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(ch);
        }
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

bool is_missing(const std::string& raw) { return raw.empty() || raw == "M"; }

const char* kRequired[] = {"station", "valid",     "tmpf", "dwpf", "relh",
                           "drct",    "sknt",      "gust", "narrative", "label"};

}  // namespace

core::Dataset parse_csv(std::istream& in) {
    // tolerate a UTF-8 byte-order mark before the header
    if (in.peek() == 0xEF) {
        char bom[3];
        in.read(bom, 3);
    }
    std::vector<std::string> fields;
    if (!read_record(in, fields)) throw std::runtime_error("empty CSV input");

    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        col[util::to_lower(fields[i])] = i;
    }
    std::string missing_cols;
    for (const char* name : kRequired) {
        if (!col.count(name)) {
            if (!missing_cols.empty()) missing_cols += ", ";
            missing_cols += name;
        }
    }
    if (!missing_cols.empty()) throw std::runtime_error("missing column: " + missing_cols);

    const std::size_t header_width = fields.size();
    core::Dataset ds;
    std::size_t row_number = 1;  // header is row 1
    std::vector<std::string> bad_rows;
    while (read_record(in, fields)) {
        ++row_number;
        if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
        if (fields.size() != header_width) {
            throw std::runtime_error("row " + std::to_string(row_number) + ": expected " +
                                     std::to_string(header_width) + " fields, got " +
                                     std::to_string(fields.size()));
        }
        core::Observation obs;
        obs.station = fields[col["station"]];
        obs.timestamp = fields[col["valid"]];
        bool row_ok = true;
        for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
            const std::string& raw = fields[col[core::feature_names()[f]]];
            if (is_missing(raw)) continue;
            double v = 0.0;
            if (!util::parse_double(raw, v)) {
                bad_rows.push_back("row " + std::to_string(row_number) + ": bad numeric '" +
                                   raw + "' in " + core::feature_names()[f]);
                row_ok = false;
                break;
            }
            obs.feature(f) = v;
        }
        if (!row_ok) continue;
        obs.narrative = fields[col["narrative"]];
        const std::string& raw_label = fields[col["label"]];
        if (!is_missing(raw_label)) {
            const std::string token = util::to_lower(raw_label);
            if (token == "low") {
                obs.label = core::RiskLabel::LowRisk;
            } else if (token == "high") {
                obs.label = core::RiskLabel::HighRisk;
            } else {
                throw std::runtime_error("row " + std::to_string(row_number) +
                                         ": bad label token '" + raw_label + "'");
            }
        }
        ds.observations.push_back(std::move(obs));
    }
    if (!bad_rows.empty()) {
        std::string msg = "rejected rows with unparseable numerics:";
        for (const auto& r : bad_rows) msg += "\n  " + r;
        throw std::runtime_error(msg);
    }
    return ds;
}

core::Dataset parse_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return parse_csv(in);
}

Imputer fit_imputer(const core::Dataset& ds, const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw std::runtime_error("fit_imputer: empty row list");
    Imputer im;
    im.fitted_on = rows.size();
    for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const std::size_t r : rows) {
            const auto& v = ds.observations.at(r).feature(f);
            if (v) {
                sum += *v;
                ++count;
            }
        }
        if (count == 0) {
            throw std::runtime_error("fit_imputer: feature " + core::feature_names()[f] +
                                     " entirely missing in source rows");
        }
        im.mean[f] = sum / static_cast<double>(count);
    }
    return im;
}

core::Dataset impute(const core::Dataset& ds, const std::vector<std::size_t>& rows,
                     const Imputer& imputer) {
    core::Dataset out;
    out.observations.reserve(rows.size());
    for (const std::size_t r : rows) {
        core::Observation obs = ds.observations.at(r);
        for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
            if (!obs.feature(f)) obs.feature(f) = imputer.mean[f];
        }
        out.observations.push_back(std::move(obs));
    }
    return out;
}

core::Dataset impute(const core::Dataset& ds, const std::vector<std::size_t>& rows,
                     const std::vector<std::size_t>& stats_source_rows) {
    return impute(ds, rows, fit_imputer(ds, stats_source_rows));
}

StandardizationStats fit_standardizer(const core::Dataset& ds,
                                      const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw std::runtime_error("fit_standardizer: empty row list");
    StandardizationStats stats;
    stats.fitted_on = rows.size();
    const double n = static_cast<double>(rows.size());
    for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
        double sum = 0.0;
        for (const std::size_t r : rows) {
            const auto& v = ds.observations.at(r).feature(f);
            if (!v) {
                throw std::runtime_error("fit_standardizer: missing value in feature " +
                                         core::feature_names()[f] + " at row " +
                                         std::to_string(r) + "; impute first");
            }
            sum += *v;
        }
        const double mean = sum / n;
        double sq = 0.0;
        for (const std::size_t r : rows) {
            const double d = *ds.observations.at(r).feature(f) - mean;
            sq += d * d;
        }
        const double var = sq / n;  // population variance
        stats.mean[f] = mean;
        if (var > 0.0) {
            stats.stddev[f] = std::sqrt(var);
        } else {
            stats.stddev[f] = 1.0;
            stats.zero_variance[f] = true;
        }
    }
    return stats;
}

FeatureMatrix apply_standardizer(const StandardizationStats& stats, const core::Dataset& ds,
                                 const std::vector<std::size_t>& rows) {
    FeatureMatrix out;
    out.reserve(rows.size());
    for (const std::size_t r : rows) {
        const auto& obs = ds.observations.at(r);
        std::vector<double> x(core::kFeatureCount);
        for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
            const auto& v = obs.feature(f);
            if (!v) {
                throw std::runtime_error("apply_standardizer: missing value at row " +
                                         std::to_string(r));
            }
            x[f] = (*v - stats.mean[f]) / stats.stddev[f];
        }
        out.push_back(std::move(x));
    }
    return out;
}

std::vector<double> standardize_row(const StandardizationStats& stats,
                                    const core::Observation& obs, const Imputer& imputer) {
    std::vector<double> x(core::kFeatureCount);
    for (std::size_t f = 0; f < core::kFeatureCount; ++f) {
        const double raw = obs.feature(f) ? *obs.feature(f) : imputer.mean[f];
        x[f] = (raw - stats.mean[f]) / stats.stddev[f];
    }
    return x;
}

SplitSpec train_test_split(std::size_t n, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train_fraction must be in (0, 1)");
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    util::Rng rng(util::derive_seed(seed, 0x5311));
    rng.shuffle(perm);
    const std::size_t n_train =
        static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
    SplitSpec spec;
    spec.train_indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    spec.test_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(spec.train_indices.begin(), spec.train_indices.end());
    std::sort(spec.test_indices.begin(), spec.test_indices.end());
    return spec;
}

SplitSpec stratified_kfold(const core::Dataset& ds, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("folds must be >= 2");
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < ds.observations.size(); ++i) {
        const auto& label = ds.observations[i].label;
        if (!label) continue;
        by_class[static_cast<int>(*label)].push_back(i);
    }
    for (int c = 0; c < core::kNumClasses; ++c) {
        if (by_class[c].size() < static_cast<std::size_t>(k)) {
            throw std::runtime_error("class '" +
                                     core::label_token(static_cast<core::RiskLabel>(c)) +
                                     "' has fewer than " + std::to_string(k) + " members");
        }
    }
    SplitSpec spec;
    spec.fold_assignments.assign(ds.observations.size(), std::nullopt);
    util::Rng rng(util::derive_seed(seed, 0xf01d5));
    // round-robin per class; the starting fold rotates between classes so
    // per-class remainders spread and global fold sizes stay within one
    std::size_t start = 0;
    for (int c = 0; c < core::kNumClasses; ++c) {
        auto& rows = by_class[c];
        rng.shuffle(rows);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            spec.fold_assignments[rows[i]] =
                static_cast<int>((start + i) % static_cast<std::size_t>(k));
        }
        start = (start + rows.size()) % static_cast<std::size_t>(k);
    }
    return spec;
}

std::string digest(const StandardizationStats& stats) {
    nlohmann::json j = stats;
    return util::hex64(util::fnv1a64(j.dump()));
}

void to_json(nlohmann::json& j, const StandardizationStats& s) {
    j = nlohmann::json{{"mean", s.mean},
                       {"stddev", s.stddev},
                       {"zero_variance", s.zero_variance},
                       {"fitted_on", s.fitted_on}};
}

void from_json(const nlohmann::json& j, StandardizationStats& s) {
    s.mean = j.at("mean").get<std::array<double, core::kFeatureCount>>();
    s.stddev = j.at("stddev").get<std::array<double, core::kFeatureCount>>();
    s.zero_variance = j.at("zero_variance").get<std::array<bool, core::kFeatureCount>>();
    s.fitted_on = j.at("fitted_on").get<std::size_t>();
}

void to_json(nlohmann::json& j, const Imputer& im) {
    j = nlohmann::json{{"mean", im.mean}, {"fitted_on", im.fitted_on}};
}

void from_json(const nlohmann::json& j, Imputer& im) {
    im.mean = j.at("mean").get<std::array<double, core::kFeatureCount>>();
    im.fitted_on = j.at("fitted_on").get<std::size_t>();
}

}  // namespace windfuse::ingest
