#include "windfuse/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "windfuse/util/common.hpp"

namespace windfuse::tabular {

double gini(const std::array<double, 2>& weighted_class_totals) {
    const double total = weighted_class_totals[0] + weighted_class_totals[1];
    if (weighted_class_totals[0] < 0.0 || weighted_class_totals[1] < 0.0) {
        throw std::invalid_argument("gini: negative class total");
    }
    if (total <= 0.0) throw std::invalid_argument("gini: both class totals zero");
    const double p0 = weighted_class_totals[0] / total;
    const double p1 = weighted_class_totals[1] / total;
    return 1.0 - p0 * p0 - p1 * p1;
}

int Tree::max_path_depth() const {
    if (feature.empty()) return 0;
    // iterative DFS from the root at node 0
    int deepest = 0;
    std::vector<std::pair<int, int>> stack{{0, 0}};
    while (!stack.empty()) {
        const auto [node, depth] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, depth);
        if (feature[static_cast<std::size_t>(node)] >= 0) {
            stack.push_back({left[static_cast<std::size_t>(node)], depth + 1});
            stack.push_back({right[static_cast<std::size_t>(node)], depth + 1});
        }
    }
    return deepest;
}

const std::array<double, 2>& Tree::predict_proba(const std::vector<double>& x) const {
    int node = 0;
    while (feature[static_cast<std::size_t>(node)] >= 0) {
        const std::size_t n = static_cast<std::size_t>(node);
        node = x[static_cast<std::size_t>(feature[n])] <= threshold[n] ? left[n] : right[n];
    }
    return leaf_probs[static_cast<std::size_t>(node)];
}

namespace {

// Guards against accepting a "split" whose impurity decrease is pure
// floating-point noise.
constexpr double kMinImpurityDecrease = 1e-12;

std::array<double, 2> weighted_totals(const Labels& y, const std::vector<std::size_t>& rows,
                                      const std::array<double, 2>& w) {
    std::array<double, 2> totals{0.0, 0.0};
    for (const std::size_t r : rows) totals[static_cast<std::size_t>(y[r])] += w[static_cast<std::size_t>(y[r])];
    return totals;
}

}  // namespace

std::optional<Split> best_split(const Matrix& X, const Labels& y,
                                const std::vector<std::size_t>& rows,
                                const std::vector<int>& features_considered,
                                const std::array<double, 2>& class_weights) {
    if (rows.size() < 2 || features_considered.empty()) return std::nullopt;

    const std::array<double, 2> parent_totals = weighted_totals(y, rows, class_weights);
    const double parent_weight = parent_totals[0] + parent_totals[1];
    const double parent_gini = gini(parent_totals);
    if (parent_gini <= 0.0) return std::nullopt;

    // ascending feature order fixes the tie-break
    std::vector<int> features = features_considered;
    std::sort(features.begin(), features.end());
    features.erase(std::unique(features.begin(), features.end()), features.end());

    std::optional<Split> best;
    std::vector<std::pair<double, int>> sorted;  // (value, label)
    sorted.reserve(rows.size());
    for (const int f : features) {
        sorted.clear();
        for (const std::size_t r : rows) {
            sorted.emplace_back(X[r][static_cast<std::size_t>(f)], y[r]);
        }
        std::sort(sorted.begin(), sorted.end());

        std::array<double, 2> left_totals{0.0, 0.0};
        for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
            left_totals[static_cast<std::size_t>(sorted[i].second)] +=
                class_weights[static_cast<std::size_t>(sorted[i].second)];
            const double a = sorted[i].first;
            const double b = sorted[i + 1].first;
            if (!(a < b)) continue;
            double threshold = a + (b - a) / 2.0;
            if (!(threshold < b)) threshold = a;  // adjacent doubles: split at the lower value
            const std::array<double, 2> right_totals{parent_totals[0] - left_totals[0],
                                                     parent_totals[1] - left_totals[1]};
            const double wl = left_totals[0] + left_totals[1];
            const double wr = right_totals[0] + right_totals[1];
            const double score = (wl * gini(left_totals) + wr * gini(right_totals)) / parent_weight;
            const double decrease = parent_gini - score;
            if (decrease <= kMinImpurityDecrease) continue;
            if (!best || decrease > best->impurity_decrease + kMinImpurityDecrease) {
                best = Split{f, threshold, decrease};
            }
        }
    }
    return best;
}

namespace {

struct TreeBuilder {
    const Matrix& X;
    const Labels& y;
    const TreeParams& params;
    util::Rng& rng;
    int n_features;
    Tree tree;

    int add_leaf(const std::vector<std::size_t>& rows) {
        std::array<double, 2> totals = weighted_totals(y, rows, params.class_weights);
        const double sum = totals[0] + totals[1];
        tree.feature.push_back(-1);
        tree.threshold.push_back(0.0);
        tree.left.push_back(-1);
        tree.right.push_back(-1);
        tree.leaf_probs.push_back({totals[0] / sum, totals[1] / sum});
        return static_cast<int>(tree.feature.size()) - 1;
    }

    bool pure(const std::vector<std::size_t>& rows) const {
        const int first = y[rows.front()];
        return std::all_of(rows.begin(), rows.end(),
                           [&](std::size_t r) { return y[r] == first; });
    }

    std::vector<int> sample_features() {
        const int k = params.feature_subsample;
        if (k <= 0 || k >= n_features) {
            std::vector<int> all(static_cast<std::size_t>(n_features));
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
        const auto picks = rng.sample_without_replacement(static_cast<std::size_t>(n_features),
                                                          static_cast<std::size_t>(k));
        return std::vector<int>(picks.begin(), picks.end());
    }

    int build(const std::vector<std::size_t>& rows, int depth) {
        if (depth >= params.max_depth || rows.size() < 2 || pure(rows)) {
            return add_leaf(rows);
        }
        const auto features = sample_features();
        const auto split = best_split(X, y, rows, features, params.class_weights);
        if (!split) return add_leaf(rows);

        std::vector<std::size_t> left_rows, right_rows;
        for (const std::size_t r : rows) {
            if (X[r][static_cast<std::size_t>(split->feature_index)] <= split->threshold) {
                left_rows.push_back(r);
            } else {
                right_rows.push_back(r);
            }
        }
        if (left_rows.empty() || right_rows.empty()) return add_leaf(rows);

        const int node = static_cast<int>(tree.feature.size());
        tree.feature.push_back(split->feature_index);
        tree.threshold.push_back(split->threshold);
        tree.left.push_back(-1);
        tree.right.push_back(-1);
        tree.leaf_probs.push_back({0.0, 0.0});
        // pre-order: node, left subtree, right subtree (fixes rng consumption order)
        tree.left[static_cast<std::size_t>(node)] = build(left_rows, depth + 1);
        tree.right[static_cast<std::size_t>(node)] = build(right_rows, depth + 1);
        return node;
    }
};

}  // namespace

Tree fit_tree(const Matrix& X, const Labels& y, const std::vector<std::size_t>& rows,
              const TreeParams& params, util::Rng& rng) {
    if (rows.empty()) throw std::invalid_argument("fit_tree: no rows");
    TreeBuilder builder{X, y, params, rng, X.empty() ? 0 : static_cast<int>(X[0].size()), {}};
    builder.build(rows, 0);
    return std::move(builder.tree);
}

ForestModel fit_forest(const Matrix& X, const Labels& y, const ForestParams& params,
                       std::uint64_t seed) {
    if (X.size() < 2 || X.size() != y.size()) {
        throw std::invalid_argument("fit_forest: need at least 2 rows with labels");
    }
    const std::size_t n = X.size();
    std::array<std::size_t, 2> counts{0, 0};
    for (const int label : y) counts[static_cast<std::size_t>(label)]++;
    if (counts[0] == 0 || counts[1] == 0) {
        throw std::runtime_error("fit_forest: training labels contain a single class");
    }

    ForestModel model;
    model.n_features = static_cast<int>(X[0].size());
    model.max_depth = params.max_depth;
    model.feature_subsample =
        params.feature_subsample > 0
            ? params.feature_subsample
            : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(model.n_features))));
    if (params.class_weight_override) {
        model.class_weights = *params.class_weight_override;
    } else {
        model.class_weights = {static_cast<double>(n) / (2.0 * static_cast<double>(counts[0])),
                               static_cast<double>(n) / (2.0 * static_cast<double>(counts[1]))};
    }
    model.seed = seed;
    model.trees.resize(static_cast<std::size_t>(params.n_trees));

    TreeParams tree_params;
    tree_params.max_depth = params.max_depth;
    tree_params.feature_subsample = model.feature_subsample;
    tree_params.class_weights = model.class_weights;

    util::parallel_for(static_cast<std::size_t>(params.n_trees), [&](std::size_t t) {
        util::Rng rng(util::derive_seed(seed, t));
        std::vector<std::size_t> rows(n);
        if (params.bootstrap) {
            for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<std::size_t>(rng.below(n));
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        model.trees[t] = fit_tree(X, y, rows, tree_params, rng);
    });
    return model;
}

std::array<double, 2> forest_predict_proba(const ForestModel& model,
                                           const std::vector<double>& x) {
    if (!model.fitted()) throw std::runtime_error("forest_predict_proba: model not fitted");
    std::array<double, 2> acc{0.0, 0.0};
    for (const auto& tree : model.trees) {
        const auto& p = tree.predict_proba(x);
        acc[0] += p[0];
        acc[1] += p[1];
    }
    const double n = static_cast<double>(model.trees.size());
    return {acc[0] / n, acc[1] / n};
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clamp_prob(double p) { return std::min(1.0 - 1e-12, std::max(1e-12, p)); }

}  // namespace

double logistic_loss_grad(const Matrix& X, const Labels& y, const std::vector<double>& w,
                          double b, double l2, std::vector<double>& grad_w, double& grad_b) {
    const std::size_t n = X.size();
    const std::size_t d = w.size();
    grad_w.assign(d, 0.0);
    grad_b = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double z = b;
        for (std::size_t f = 0; f < d; ++f) z += w[f] * X[i][f];
        const double p = clamp_prob(sigmoid(z));
        const double target = static_cast<double>(y[i]);
        loss += -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
        const double err = sigmoid(z) - target;
        for (std::size_t f = 0; f < d; ++f) grad_w[f] += err * X[i][f];
        grad_b += err;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    loss *= inv_n;
    grad_b *= inv_n;
    double penalty = 0.0;
    for (std::size_t f = 0; f < d; ++f) {
        grad_w[f] = grad_w[f] * inv_n + l2 * w[f];
        penalty += w[f] * w[f];
    }
    return loss + 0.5 * l2 * penalty;
}

LogisticModel fit_logistic(const Matrix& X, const Labels& y, const LogisticParams& params) {
    if (X.empty() || X.size() != y.size()) throw std::invalid_argument("fit_logistic: bad input");
    std::array<std::size_t, 2> counts{0, 0};
    for (const int label : y) counts[static_cast<std::size_t>(label)]++;
    if (counts[0] == 0 || counts[1] == 0) {
        throw std::runtime_error("fit_logistic: training labels contain a single class");
    }
    const std::size_t d = X[0].size();
    LogisticModel model;
    model.weights.assign(d, 0.0);
    model.bias = 0.0;

    std::vector<double> grad_w;
    double grad_b = 0.0;
    double step = 1.0;
    double loss = logistic_loss_grad(X, y, model.weights, model.bias, params.l2, grad_w, grad_b);
    for (int iter = 0; iter < params.max_iters; ++iter) {
        model.iterations = iter + 1;
        double grad_norm = grad_b * grad_b;
        for (const double g : grad_w) grad_norm += g * g;
        grad_norm = std::sqrt(grad_norm);
        if (grad_norm < params.grad_tol) {
            model.converged = true;
            break;
        }
        // backtracking line search on the full-batch objective
        std::vector<double> w_try(d);
        double b_try = 0.0;
        double new_loss = 0.0;
        std::vector<double> grad_w_try;
        double grad_b_try = 0.0;
        for (;;) {
            for (std::size_t f = 0; f < d; ++f) w_try[f] = model.weights[f] - step * grad_w[f];
            b_try = model.bias - step * grad_b;
            new_loss = logistic_loss_grad(X, y, w_try, b_try, params.l2, grad_w_try, grad_b_try);
            if (new_loss <= loss - 1e-4 * step * grad_norm * grad_norm || step < 1e-12) break;
            step *= 0.5;
        }
        model.weights.swap(w_try);
        model.bias = b_try;
        loss = new_loss;
        grad_w.swap(grad_w_try);
        grad_b = grad_b_try;
        step = std::min(step * 2.0, 1e6);
    }
    return model;
}

std::array<double, 2> logistic_predict_proba(const LogisticModel& model,
                                             const std::vector<double>& x) {
    double z = model.bias;
    for (std::size_t f = 0; f < model.weights.size(); ++f) z += model.weights[f] * x[f];
    const double p_high = sigmoid(z);
    return {1.0 - p_high, p_high};
}

std::string digest(const ForestModel& model) {
    nlohmann::json j = model;
    return util::hex64(util::fnv1a64(j.dump()));
}

void to_json(nlohmann::json& j, const Tree& t) {
    j = nlohmann::json{{"feature", t.feature},
                       {"threshold", t.threshold},
                       {"left", t.left},
                       {"right", t.right},
                       {"leaf_probs", t.leaf_probs}};
}

void from_json(const nlohmann::json& j, Tree& t) {
    t.feature = j.at("feature").get<std::vector<int>>();
    t.threshold = j.at("threshold").get<std::vector<double>>();
    t.left = j.at("left").get<std::vector<int>>();
    t.right = j.at("right").get<std::vector<int>>();
    t.leaf_probs = j.at("leaf_probs").get<std::vector<std::array<double, 2>>>();
}

void to_json(nlohmann::json& j, const ForestModel& m) {
    j = nlohmann::json{{"version", 1},
                       {"trees", m.trees},
                       {"n_features", m.n_features},
                       {"max_depth", m.max_depth},
                       {"feature_subsample", m.feature_subsample},
                       {"class_weights", m.class_weights},
                       {"seed", m.seed}};
}

void from_json(const nlohmann::json& j, ForestModel& m) {
    m.trees = j.at("trees").get<std::vector<Tree>>();
    m.n_features = j.at("n_features").get<int>();
    m.max_depth = j.at("max_depth").get<int>();
    m.feature_subsample = j.at("feature_subsample").get<int>();
    m.class_weights = j.at("class_weights").get<std::array<double, 2>>();
    m.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace windfuse::tabular
