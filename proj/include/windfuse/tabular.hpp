#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "windfuse/util/rng.hpp"

namespace windfuse::tabular {

using Matrix = std::vector<std::vector<double>>;
using Labels = std::vector<int>;  // 0 = low, 1 = high

/// Gini impurity of weighted class totals: 1 - p0^2 - p1^2.
double gini(const std::array<double, 2>& weighted_class_totals);

struct TreeParams {
    int max_depth = 12;
    int feature_subsample = 0;  // 0 = consider all features
    std::array<double, 2> class_weights{1.0, 1.0};
};

/// Flattened binary tree. Node i is internal iff feature[i] >= 0; leaves
/// carry class probabilities summing to 1.
struct Tree {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<std::array<double, 2>> leaf_probs;

    std::size_t node_count() const { return feature.size(); }
    int max_path_depth() const;
    const std::array<double, 2>& predict_proba(const std::vector<double>& x) const;
};

struct Split {
    int feature_index = -1;
    double threshold = 0.0;
    double impurity_decrease = 0.0;
};

/// Best split over the given rows and candidate features: thresholds are
/// midpoints between consecutive distinct sorted values, scored by the
/// weight-averaged child Gini. Ties break toward the lower feature index,
/// then the lower threshold. Empty when no split reduces impurity.
std::optional<Split> best_split(const Matrix& X, const Labels& y,
                                const std::vector<std::size_t>& rows,
                                const std::vector<int>& features_considered,
                                const std::array<double, 2>& class_weights);

/// Recursive induction; each node samples feature_subsample distinct
/// features through rng. Stops at max_depth, purity, fewer than two rows,
/// or no impurity-reducing split.
Tree fit_tree(const Matrix& X, const Labels& y, const std::vector<std::size_t>& rows,
              const TreeParams& params, util::Rng& rng);

struct ForestParams {
    int n_trees = 100;
    int max_depth = 12;
    int feature_subsample = 0;  // 0 = auto: ceil(sqrt(n_features))
    bool bootstrap = true;
    // Overrides the inverse-frequency class weights (test hook).
    std::optional<std::array<double, 2>> class_weight_override;
};

struct ForestModel {
    std::vector<Tree> trees;
    int n_features = 0;
    int max_depth = 12;
    int feature_subsample = 0;
    std::array<double, 2> class_weights{1.0, 1.0};
    std::uint64_t seed = 0;

    bool fitted() const { return !trees.empty(); }
};

/// Bagged forest; tree t uses an rng derived from (seed, t) and a bootstrap
/// resample of the rows. Class weights are inverse-frequency,
/// N / (2 * N_c), computed once from y.
ForestModel fit_forest(const Matrix& X, const Labels& y, const ForestParams& params,
                       std::uint64_t seed);

/// Mean of the trees' leaf probabilities; this is the RF stream output.
std::array<double, 2> forest_predict_proba(const ForestModel& model,
                                           const std::vector<double>& x);

struct LogisticParams {
    double l2 = 1e-4;
    double grad_tol = 1e-6;
    int max_iters = 10000;
};

struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Full-batch gradient descent (backtracking line search) on mean
/// cross-entropy with an L2 penalty on the weights. Non-convergence within
/// the iteration cap is recorded on the model, not thrown.
LogisticModel fit_logistic(const Matrix& X, const Labels& y, const LogisticParams& params);

std::array<double, 2> logistic_predict_proba(const LogisticModel& model,
                                             const std::vector<double>& x);

/// Loss and gradient of the logistic objective at (weights, bias); exposed
/// for the finite-difference check.
double logistic_loss_grad(const Matrix& X, const Labels& y, const std::vector<double>& w,
                          double b, double l2, std::vector<double>& grad_w, double& grad_b);

std::string digest(const ForestModel& model);

void to_json(nlohmann::json& j, const Tree& t);
void from_json(const nlohmann::json& j, Tree& t);
void to_json(nlohmann::json& j, const ForestModel& m);
void from_json(const nlohmann::json& j, ForestModel& m);

}  // namespace windfuse::tabular
