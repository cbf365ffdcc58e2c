#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hydro/common.hpp"
#include "hydro/labeling.hpp"
#include "hydro/parallel.hpp"

namespace hydro {

struct SplitCandidate {
    double threshold = 0.0;
    double gain = 0.0;
};

namespace gbt_detail {

inline double leaf_objective(double g, double h, double l2) { return g * g / (h + l2); }

}  // namespace gbt_detail

// Exhaustive scan over midpoints of sorted unique values. Second-order gain:
// GL^2/(HL+l2) + GR^2/(HR+l2) - (GL+GR)^2/(HL+HR+l2). Samples with
// value < threshold go left. Ties break toward the lowest threshold; returns
// nullopt when no positive-gain split satisfies min_samples_leaf.
inline std::optional<SplitCandidate> best_split(std::span<const double> values,
                                                std::span<const double> gradients,
                                                std::span<const double> hessians,
                                                int min_samples_leaf, double l2) {
    const std::size_t n = values.size();
    if (gradients.size() != n || hessians.size() != n)
        throw data_error("best_split: length mismatch");
    if (n < 2 * static_cast<std::size_t>(min_samples_leaf)) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    double g_total = 0.0, h_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        g_total += gradients[i];
        h_total += hessians[i];
    }
    const double parent = gbt_detail::leaf_objective(g_total, h_total, l2);

    std::optional<SplitCandidate> best;
    double gl = 0.0, hl = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        gl += gradients[order[i]];
        hl += hessians[order[i]];
        const double v = values[order[i]];
        const double vn = values[order[i + 1]];
        if (!(vn > v)) continue;
        const auto left_count = static_cast<int>(i + 1);
        const auto right_count = static_cast<int>(n - i - 1);
        if (left_count < min_samples_leaf || right_count < min_samples_leaf) continue;
        const double gain = gbt_detail::leaf_objective(gl, hl, l2) +
                            gbt_detail::leaf_objective(g_total - gl, h_total - hl, l2) - parent;
        if (gain > 0.0 && (!best || gain > best->gain))
            best = SplitCandidate{v + (vn - v) / 2.0, gain};
    }
    return best;
}

struct TreeNode {
    int feature = -1;       // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double leaf_value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    double score(std::span<const double> features) const {
        int i = 0;
        while (!nodes[i].is_leaf())
            i = features[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i].leaf_value;
    }
};

struct Hyperparams {
    int n_rounds = 200;
    int max_depth = 4;
    double learning_rate = 0.1;
    int min_samples_leaf = 20;
    double l2 = 1.0;
    std::uint64_t seed = 1;
};

enum class Task { kRegression, kClassification };

struct BoostedModel {
    Task task = Task::kRegression;
    int n_classes = 1;
    std::vector<double> base_scores;  // 1 entry for regression, k for classification
    std::vector<Tree> trees;          // round-major; n_classes trees per round
    Hyperparams hp;
    std::size_t n_features = 0;
    std::vector<double> train_loss;   // per completed round (MSE / mean NLL)

    std::vector<double> raw_scores(std::span<const double> features) const {
        if (features.size() != n_features) throw data_error("predict: feature dimension mismatch");
        std::vector<double> raw = base_scores;
        for (std::size_t i = 0; i < trees.size(); ++i)
            raw[i % static_cast<std::size_t>(n_classes)] += trees[i].score(features);
        return raw;
    }

    // Regression output, clamped to [0,1] (labels are frequencies).
    double predict_wf(std::span<const double> features) const {
        if (task != Task::kRegression) throw data_error("predict_wf: not a regression model");
        return std::clamp(raw_scores(features)[0], 0.0, 1.0);
    }

    std::vector<double> predict_proba(std::span<const double> features) const {
        if (task != Task::kClassification) throw data_error("predict_proba: not a classifier");
        auto raw = raw_scores(features);
        const double m = *std::max_element(raw.begin(), raw.end());
        double z = 0.0;
        for (double& r : raw) {
            r = std::exp(r - m);
            z += r;
        }
        for (double& r : raw) r /= z;
        return raw;
    }

    int predict_class(std::span<const double> features) const {
        const auto p = predict_proba(features);
        return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    }
};

namespace gbt_detail {

// Column-major training matrix with per-feature presorted sample order.
struct TrainMatrix {
    std::size_t n = 0, d = 0;
    std::vector<std::vector<double>> columns;       // [feature][sample]
    std::vector<std::vector<std::uint32_t>> order;  // [feature], ascending by value

    TrainMatrix(const std::vector<std::vector<double>>& rows, int threads) {
        n = rows.size();
        d = n ? rows[0].size() : 0;
        columns.assign(d, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i) {
            if (rows[i].size() != d) throw data_error("gbt: ragged feature rows");
            for (std::size_t f = 0; f < d; ++f) columns[f][i] = rows[i][f];
        }
        order.assign(d, {});
        parallel_for(d, threads, [&](std::size_t f) {
            order[f].resize(n);
            std::iota(order[f].begin(), order[f].end(), 0u);
            std::stable_sort(order[f].begin(), order[f].end(), [&](std::uint32_t a, std::uint32_t b) {
                return columns[f][a] < columns[f][b];
            });
        });
    }
};

struct NodeBest {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

// Grows one depth-limited tree level by level over the presorted matrix.
// Candidate reduction order is (max gain, lowest feature, lowest threshold),
// so results do not depend on the feature-scan parallelism.
inline Tree grow_tree(const TrainMatrix& mat, std::span<const double> grad,
                      std::span<const double> hess, const Hyperparams& hp, int threads) {
    Tree tree;
    std::vector<std::uint32_t> node_of(mat.n, 0);

    double g0 = 0.0, h0 = 0.0;
    for (std::size_t i = 0; i < mat.n; ++i) {
        g0 += grad[i];
        h0 += hess[i];
    }
    tree.nodes.push_back({});
    std::vector<double> node_g = {g0}, node_h = {h0};
    std::vector<int> node_count = {static_cast<int>(mat.n)};
    std::vector<int> active = {0};

    for (int depth = 0; depth < hp.max_depth && !active.empty(); ++depth) {
        const std::size_t nn = tree.nodes.size();
        std::vector<char> is_active(nn, 0);
        for (int id : active) is_active[static_cast<std::size_t>(id)] = 1;

        // Per-feature pass: running left-side stats per active node.
        std::vector<std::vector<NodeBest>> per_feature(mat.d);
        parallel_for(mat.d, threads, [&](std::size_t f) {
            auto& best = per_feature[f];
            best.assign(nn, {});
            std::vector<double> gl(nn, 0.0), hl(nn, 0.0), prev(nn, 0.0);
            std::vector<int> cnt(nn, 0);
            const auto& col = mat.columns[f];
            for (std::uint32_t idx : mat.order[f]) {
                const std::uint32_t node = node_of[idx];
                if (!is_active[node]) continue;
                const double v = col[idx];
                if (cnt[node] > 0 && v > prev[node]) {
                    const int lc = cnt[node], rc = node_count[node] - lc;
                    if (lc >= hp.min_samples_leaf && rc >= hp.min_samples_leaf) {
                        const double gain =
                            leaf_objective(gl[node], hl[node], hp.l2) +
                            leaf_objective(node_g[node] - gl[node], node_h[node] - hl[node], hp.l2) -
                            leaf_objective(node_g[node], node_h[node], hp.l2);
                        if (gain > 0.0 && gain > best[node].gain) {
                            best[node].gain = gain;
                            best[node].feature = static_cast<int>(f);
                            best[node].threshold = prev[node] + (v - prev[node]) / 2.0;
                        }
                    }
                }
                gl[node] += grad[idx];
                hl[node] += hess[idx];
                ++cnt[node];
                prev[node] = v;
            }
        });

        // Deterministic merge in ascending feature order.
        std::vector<NodeBest> chosen(nn);
        for (std::size_t f = 0; f < mat.d; ++f)
            for (int id : active) {
                const auto& c = per_feature[f][static_cast<std::size_t>(id)];
                if (c.feature >= 0 && c.gain > chosen[static_cast<std::size_t>(id)].gain)
                    chosen[static_cast<std::size_t>(id)] = c;
            }

        std::vector<int> next_active;
        std::vector<int> left_child(nn, -1);
        for (int id : active) {
            const auto& c = chosen[static_cast<std::size_t>(id)];
            if (c.feature < 0) continue;  // stays a leaf
            auto& node = tree.nodes[static_cast<std::size_t>(id)];
            node.feature = c.feature;
            node.threshold = c.threshold;
            node.left = static_cast<int>(tree.nodes.size());
            node.right = node.left + 1;
            left_child[static_cast<std::size_t>(id)] = node.left;
            tree.nodes.push_back({});
            tree.nodes.push_back({});
            node_g.resize(tree.nodes.size(), 0.0);
            node_h.resize(tree.nodes.size(), 0.0);
            node_count.resize(tree.nodes.size(), 0);
            next_active.push_back(node.left);
            next_active.push_back(node.right);
        }

        // Re-assign samples of split nodes and accumulate child stats.
        for (std::size_t i = 0; i < mat.n; ++i) {
            const std::uint32_t node = node_of[i];
            if (node >= nn || left_child[node] < 0) continue;
            const auto& parent = tree.nodes[node];
            const bool go_left = mat.columns[static_cast<std::size_t>(parent.feature)][i] < parent.threshold;
            const int child = go_left ? parent.left : parent.right;
            node_of[i] = static_cast<std::uint32_t>(child);
            node_g[static_cast<std::size_t>(child)] += grad[i];
            node_h[static_cast<std::size_t>(child)] += hess[i];
            ++node_count[static_cast<std::size_t>(child)];
        }
        active = std::move(next_active);
    }

    // Finalize leaves: Newton step scaled by the learning rate.
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
        auto& node = tree.nodes[id];
        if (!node.is_leaf()) continue;
        node.leaf_value = -hp.learning_rate * node_g[id] / (node_h[id] + hp.l2);
    }
    return tree;
}

}  // namespace gbt_detail

// Squared-error boosting: base score is the label mean, gradients are
// (prediction - label), unit hessians.
inline BoostedModel train_regressor(const std::vector<std::vector<double>>& features,
                                    const std::vector<double>& labels, const Hyperparams& hp,
                                    int threads = 1) {
    const std::size_t n = features.size();
    if (n == 0) throw data_error("train_regressor: empty dataset");
    if (labels.size() != n) throw data_error("train_regressor: label count mismatch");

    BoostedModel model;
    model.task = Task::kRegression;
    model.n_classes = 1;
    model.hp = hp;
    model.n_features = features[0].size();
    model.base_scores = {std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(n)};

    gbt_detail::TrainMatrix mat(features, threads);
    std::vector<double> pred(n, model.base_scores[0]);
    std::vector<double> grad(n), hess(n, 1.0);
    for (int round = 0; round < hp.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - labels[i];
        Tree tree = gbt_detail::grow_tree(mat, grad, hess, hp, threads);
        double mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            // Score via the per-sample row view of the column store.
            int node = 0;
            while (!tree.nodes[static_cast<std::size_t>(node)].is_leaf()) {
                const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
                node = mat.columns[static_cast<std::size_t>(nd.feature)][i] < nd.threshold ? nd.left
                                                                                           : nd.right;
            }
            pred[i] += tree.nodes[static_cast<std::size_t>(node)].leaf_value;
            const double r = pred[i] - labels[i];
            mse += r * r;
        }
        model.trees.push_back(std::move(tree));
        model.train_loss.push_back(mse / static_cast<double>(n));
    }
    return model;
}

// k-class softmax boosting: one tree per class per round, base scores are
// log class priors, gradients p_k - 1{y=k}, hessians p_k(1-p_k) floored.
inline BoostedModel train_classifier(const std::vector<std::vector<double>>& features,
                                     const std::vector<int>& labels, int n_classes,
                                     const Hyperparams& hp, int threads = 1) {
    const std::size_t n = features.size();
    if (n == 0) throw data_error("train_classifier: empty dataset");
    if (labels.size() != n) throw data_error("train_classifier: label count mismatch");
    if (n_classes < 2) throw data_error("train_classifier: need at least 2 classes");
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (int y : labels) {
        if (y < 0 || y >= n_classes) throw data_error("train_classifier: label out of range");
        ++counts[static_cast<std::size_t>(y)];
    }
    int present = 0;
    for (auto c : counts) present += c > 0;
    if (present < 2) throw data_error("train_classifier: single-class dataset");

    BoostedModel model;
    model.task = Task::kClassification;
    model.n_classes = n_classes;
    model.hp = hp;
    model.n_features = features[0].size();
    model.base_scores.resize(static_cast<std::size_t>(n_classes));
    for (int k = 0; k < n_classes; ++k)
        model.base_scores[static_cast<std::size_t>(k)] =
            std::log((static_cast<double>(counts[static_cast<std::size_t>(k)]) + 1.0) /
                     (static_cast<double>(n) + static_cast<double>(n_classes)));

    gbt_detail::TrainMatrix mat(features, threads);
    std::vector<std::vector<double>> raw(static_cast<std::size_t>(n_classes),
                                         std::vector<double>(n));
    for (int k = 0; k < n_classes; ++k)
        std::fill(raw[static_cast<std::size_t>(k)].begin(), raw[static_cast<std::size_t>(k)].end(),
                  model.base_scores[static_cast<std::size_t>(k)]);

    std::vector<std::vector<double>> prob(static_cast<std::size_t>(n_classes),
                                          std::vector<double>(n));
    std::vector<double> grad(n), hess(n);
    const auto update_probs = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            double m = raw[0][i];
            for (int k = 1; k < n_classes; ++k)
                m = std::max(m, raw[static_cast<std::size_t>(k)][i]);
            double z = 0.0;
            for (int k = 0; k < n_classes; ++k) {
                prob[static_cast<std::size_t>(k)][i] = std::exp(raw[static_cast<std::size_t>(k)][i] - m);
                z += prob[static_cast<std::size_t>(k)][i];
            }
            for (int k = 0; k < n_classes; ++k) prob[static_cast<std::size_t>(k)][i] /= z;
        }
    };

    for (int round = 0; round < hp.n_rounds; ++round) {
        update_probs();
        for (int k = 0; k < n_classes; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = prob[static_cast<std::size_t>(k)][i];
                grad[i] = p - (labels[i] == k ? 1.0 : 0.0);
                hess[i] = std::max(p * (1.0 - p), 1e-6);
            }
            Tree tree = gbt_detail::grow_tree(mat, grad, hess, hp, threads);
            for (std::size_t i = 0; i < n; ++i) {
                int node = 0;
                while (!tree.nodes[static_cast<std::size_t>(node)].is_leaf()) {
                    const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
                    node = mat.columns[static_cast<std::size_t>(nd.feature)][i] < nd.threshold
                               ? nd.left
                               : nd.right;
                }
                raw[static_cast<std::size_t>(k)][i] +=
                    tree.nodes[static_cast<std::size_t>(node)].leaf_value;
            }
            model.trees.push_back(std::move(tree));
        }
        update_probs();
        double nll = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            nll -= std::log(std::max(prob[static_cast<std::size_t>(labels[i])][i], 1e-300));
        model.train_loss.push_back(nll / static_cast<double>(n));
    }
    return model;
}

// Model file: JSON {task, n_classes, base_scores, hyperparameters, seed,
// n_features, trees:[{nodes:[...]}]}.
inline nlohmann::json model_to_json(const BoostedModel& m) {
    nlohmann::json j;
    j["task"] = m.task == Task::kRegression ? "regression" : "classification";
    j["n_classes"] = m.n_classes;
    j["base_scores"] = m.base_scores;
    j["n_features"] = m.n_features;
    j["hyperparameters"] = {{"n_rounds", m.hp.n_rounds},
                            {"max_depth", m.hp.max_depth},
                            {"learning_rate", m.hp.learning_rate},
                            {"min_samples_leaf", m.hp.min_samples_leaf},
                            {"l2", m.hp.l2}};
    j["seed"] = m.hp.seed;
    j["trees"] = nlohmann::json::array();
    for (const auto& tree : m.trees) {
        nlohmann::json tj;
        tj["nodes"] = nlohmann::json::array();
        for (const auto& nd : tree.nodes)
            tj["nodes"].push_back({{"feature", nd.feature},
                                   {"threshold", nd.threshold},
                                   {"left", nd.left},
                                   {"right", nd.right},
                                   {"leaf_value", nd.leaf_value}});
        j["trees"].push_back(std::move(tj));
    }
    return j;
}

inline BoostedModel model_from_json(const nlohmann::json& j) {
    BoostedModel m;
    const std::string task = j.at("task");
    if (task == "regression") m.task = Task::kRegression;
    else if (task == "classification") m.task = Task::kClassification;
    else throw format_error("model: unknown task '" + task + "'");
    m.n_classes = j.at("n_classes");
    m.base_scores = j.at("base_scores").get<std::vector<double>>();
    m.n_features = j.at("n_features");
    const auto& hj = j.at("hyperparameters");
    m.hp.n_rounds = hj.at("n_rounds");
    m.hp.max_depth = hj.at("max_depth");
    m.hp.learning_rate = hj.at("learning_rate");
    m.hp.min_samples_leaf = hj.at("min_samples_leaf");
    m.hp.l2 = hj.at("l2");
    m.hp.seed = j.at("seed");
    for (const auto& tj : j.at("trees")) {
        Tree tree;
        for (const auto& nj : tj.at("nodes")) {
            TreeNode nd;
            nd.feature = nj.at("feature");
            nd.threshold = nj.at("threshold");
            nd.left = nj.at("left");
            nd.right = nj.at("right");
            nd.leaf_value = nj.at("leaf_value");
            tree.nodes.push_back(nd);
        }
        m.trees.push_back(std::move(tree));
    }
    return m;
}

inline void write_model(const BoostedModel& m, const std::filesystem::path& path) {
    detail::write_file_atomic(path, model_to_json(m).dump() + "\n");
}

inline BoostedModel read_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open model " + path.string());
    return model_from_json(nlohmann::json::parse(in));
}

}  // namespace hydro
