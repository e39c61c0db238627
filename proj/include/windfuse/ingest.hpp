#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "windfuse/core.hpp"

namespace windfuse::ingest {

using FeatureMatrix = std::vector<std::vector<double>>;

/// Per-feature mean and population standard deviation, fitted on a fixed
/// set of rows. Read-only after fitting.
struct StandardizationStats {
    std::array<double, core::kFeatureCount> mean{};
    std::array<double, core::kFeatureCount> stddev{};  // 1.0 for zero-variance features
    std::array<bool, core::kFeatureCount> zero_variance{};
    std::size_t fitted_on = 0;
};

/// Per-feature training means used to fill missing numerics.
struct Imputer {
    std::array<double, core::kFeatureCount> mean{};
    std::size_t fitted_on = 0;
};

struct SplitSpec {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    // fold id per row; nullopt for rows not assigned (e.g. unlabeled)
    std::vector<std::optional<int>> fold_assignments;
};

/// Parses the station CSV export. Header must name at least: station, valid,
/// tmpf, dwpf, relh, drct, sknt, gust, narrative, label. "M" and the empty
/// string are missing markers; labels are "low"/"high" (case-insensitive),
/// empty or "M" for unlabeled. Quoted fields follow RFC 4180.
core::Dataset parse_csv(std::istream& in);
core::Dataset parse_csv_file(const std::string& path);

/// Fits an imputer on the non-missing values of the given rows. Throws if a
/// feature is entirely missing across those rows.
Imputer fit_imputer(const core::Dataset& ds, const std::vector<std::size_t>& rows);

/// Returns a copy of the selected rows with every missing numeric replaced
/// by the imputer's per-feature mean. Narratives are never imputed.
core::Dataset impute(const core::Dataset& ds, const std::vector<std::size_t>& rows,
                     const Imputer& imputer);

/// Convenience: fit the imputer on stats_source_rows, then apply to rows.
core::Dataset impute(const core::Dataset& ds, const std::vector<std::size_t>& rows,
                     const std::vector<std::size_t>& stats_source_rows);

/// Mean / population std over exactly the given rows, which must have no
/// missing numerics. Zero-variance features are recorded with std 1 and
/// flagged.
StandardizationStats fit_standardizer(const core::Dataset& ds,
                                      const std::vector<std::size_t>& rows);

/// (value - mean) / std per feature for each requested row.
FeatureMatrix apply_standardizer(const StandardizationStats& stats, const core::Dataset& ds,
                                 const std::vector<std::size_t>& rows);

std::vector<double> standardize_row(const StandardizationStats& stats,
                                    const core::Observation& obs, const Imputer& imputer);

/// Seeded uniform split; train size = round(N * fraction).
SplitSpec train_test_split(std::size_t n, double train_fraction, std::uint64_t seed);

/// Stratified k-fold over labeled rows; per-class fold sizes differ by at
/// most one. Throws if a class has fewer than k members.
SplitSpec stratified_kfold(const core::Dataset& ds, int k, std::uint64_t seed);

std::string digest(const StandardizationStats& stats);

void to_json(nlohmann::json& j, const StandardizationStats& s);
void from_json(const nlohmann::json& j, StandardizationStats& s);
void to_json(nlohmann::json& j, const Imputer& im);
void from_json(const nlohmann::json& j, Imputer& im);

}  // namespace windfuse::ingest
