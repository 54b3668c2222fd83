#include "forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "errors.hpp"
#include "parallel.hpp"
#include "version.hpp"

namespace crx {

namespace {

double gini(uint32_t n_success, uint32_t n_failure) {
    const double n = static_cast<double>(n_success) + static_cast<double>(n_failure);
    if (n <= 0.0) return 0.0;
    const double ps = static_cast<double>(n_success) / n;
    const double pf = static_cast<double>(n_failure) / n;
    return 1.0 - ps * ps - pf * pf;
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;  // weighted child impurity
};

// Best midpoint split of one feature within a node; nullopt when the
// feature is constant or no partition satisfies min_leaf.
std::optional<SplitChoice> best_split_for_feature(const FeatureMatrix& m, int feature,
                                                  std::span<const size_t> rows,
                                                  std::span<const uint8_t> labels,
                                                  int min_leaf) {
    const size_t n = rows.size();
    std::vector<std::pair<double, uint8_t>> vals;
    vals.reserve(n);
    for (size_t r : rows) vals.emplace_back(m.value(r, feature), labels[r]);
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    uint32_t total_s = 0;
    for (const auto& [v, l] : vals) total_s += l;
    const auto total = static_cast<uint32_t>(n);
    const uint32_t total_f = total - total_s;

    std::optional<SplitChoice> best;
    uint32_t left_s = 0, left_n = 0;
    for (size_t i = 0; i + 1 < n; ++i) {
        left_s += vals[i].second;
        ++left_n;
        if (vals[i].first == vals[i + 1].first) continue;
        const double thr = vals[i].first + 0.5 * (vals[i + 1].first - vals[i].first);
        // A midpoint of adjacent doubles can round onto an endpoint; such a
        // threshold would not separate the values, so skip it.
        if (!(vals[i].first < thr) || !(thr <= vals[i + 1].first)) continue;
        const uint32_t right_n = total - left_n;
        if (left_n < static_cast<uint32_t>(min_leaf) ||
            right_n < static_cast<uint32_t>(min_leaf))
            continue;
        const uint32_t left_f = left_n - left_s;
        const double score = (static_cast<double>(left_n) * gini(left_s, left_f) +
                              static_cast<double>(right_n) *
                                  gini(total_s - left_s, total_f - left_f)) /
                             static_cast<double>(n);
        if (!best || score < best->score ||
            (score == best->score && thr < best->threshold)) {
            best = SplitChoice{feature, thr, score};
        }
    }
    return best;
}

struct TreeBuilder {
    const FeatureMatrix& m;
    std::span<const uint8_t> labels;
    const Hyperparameters& hp;
    Rng& rng;
    Tree tree;

    int build(std::vector<size_t>& rows, int depth) {
        uint32_t n_s = 0;
        for (size_t r : rows) n_s += labels[r];
        const auto n = static_cast<uint32_t>(rows.size());
        const uint32_t n_f = n - n_s;

        const int node_idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node_idx].n_success = n_s;
        tree.nodes[node_idx].n_failure = n_f;

        const bool pure = n_s == 0 || n_f == 0;
        const bool depth_stop = !hp.unlimited_depth() && depth >= hp.max_depth;
        if (pure || depth_stop || n < 2 * static_cast<uint32_t>(hp.min_leaf) || n < 2)
            return node_idx;

        // Candidate features in a fresh random order for this node. The
        // first max_features entries are always examined; when none of them
        // admits a valid split, keep scanning so an impure node with any
        // separable feature still makes progress.
        const auto order = rng.permutation(kNumFeatures);
        const int cap = hp.max_features_count();
        std::optional<SplitChoice> best;
        int best_feature_rank = -1;
        for (int k = 0; k < kNumFeatures; ++k) {
            if (k >= cap && best) break;
            const int f = static_cast<int>(order[k]);
            auto cand = best_split_for_feature(m, f, rows, labels, hp.min_leaf);
            if (!cand) continue;
            if (!best || cand->score < best->score ||
                (cand->score == best->score &&
                 (cand->feature < best->feature ||
                  (cand->feature == best->feature && cand->threshold < best->threshold)))) {
                best = cand;
                best_feature_rank = k;
            }
        }
        (void)best_feature_rank;
        if (!best) return node_idx;  // nothing separable: forced leaf

        std::vector<size_t> left_rows, right_rows;
        left_rows.reserve(rows.size());
        right_rows.reserve(rows.size());
        for (size_t r : rows) {
            if (m.value(r, best->feature) < best->threshold)
                left_rows.push_back(r);
            else
                right_rows.push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[node_idx].feature = best->feature;
        tree.nodes[node_idx].threshold = best->threshold;
        const int left_idx = build(left_rows, depth + 1);
        tree.nodes[node_idx].left = left_idx;
        const int right_idx = build(right_rows, depth + 1);
        tree.nodes[node_idx].right = right_idx;
        return node_idx;
    }
};

std::vector<size_t> bootstrap_rows(std::span<const size_t> rows, Rng& rng,
                                   bool with_replacement) {
    std::vector<size_t> out;
    if (with_replacement) {
        out.reserve(rows.size());
        for (size_t i = 0; i < rows.size(); ++i)
            out.push_back(rows[rng.bounded(rows.size())]);
    } else {
        // subset mode: ~63.2% of rows, matching a bootstrap's expected
        // unique fraction
        std::vector<size_t> pool(rows.begin(), rows.end());
        rng.shuffle(pool);
        const auto take = std::max<size_t>(
            1, static_cast<size_t>(std::llround(0.632 * static_cast<double>(pool.size()))));
        out.assign(pool.begin(), pool.begin() + static_cast<long>(take));
    }
    return out;
}

void importance_walk(const Tree& tree, int idx, double n_root, std::vector<double>& acc) {
    const TreeNode& node = tree.nodes[static_cast<size_t>(idx)];
    if (node.is_leaf()) return;
    const TreeNode& l = tree.nodes[static_cast<size_t>(node.left)];
    const TreeNode& r = tree.nodes[static_cast<size_t>(node.right)];
    const double n = static_cast<double>(node.n_success) + node.n_failure;
    const double nl = static_cast<double>(l.n_success) + l.n_failure;
    const double nr = static_cast<double>(r.n_success) + r.n_failure;
    const double decrease = gini(node.n_success, node.n_failure) -
                            (nl * gini(l.n_success, l.n_failure) +
                             nr * gini(r.n_success, r.n_failure)) /
                                n;
    acc[static_cast<size_t>(node.feature)] += (n / n_root) * decrease;
    importance_walk(tree, node.left, n_root, acc);
    importance_walk(tree, node.right, n_root, acc);
}

nlohmann::ordered_json node_to_json(const Tree& tree, int idx) {
    const TreeNode& node = tree.nodes[static_cast<size_t>(idx)];
    nlohmann::ordered_json j;
    if (node.is_leaf()) {
        j["leaf"] = {node.n_success, node.n_failure};
    } else {
        j["f"] = node.feature;
        j["t"] = node.threshold;
        j["l"] = node_to_json(tree, node.left);
        j["r"] = node_to_json(tree, node.right);
    }
    return j;
}

int node_from_json(const nlohmann::json& j, Tree& tree) {
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (j.contains("leaf")) {
        require(j["leaf"].is_array() && j["leaf"].size() == 2, CRX_E_CORRUPT_MODEL,
                "model: bad leaf");
        tree.nodes[idx].n_success = j["leaf"][0].get<uint32_t>();
        tree.nodes[idx].n_failure = j["leaf"][1].get<uint32_t>();
        require(tree.nodes[idx].n_success + tree.nodes[idx].n_failure > 0,
                CRX_E_CORRUPT_MODEL, "model: empty leaf");
    } else {
        require(j.contains("f") && j.contains("t") && j.contains("l") && j.contains("r"),
                CRX_E_CORRUPT_MODEL, "model: bad split node");
        const int f = j["f"].get<int>();
        require(f >= 0 && f < kNumFeatures, CRX_E_CORRUPT_MODEL,
                "model: feature index out of range");
        tree.nodes[idx].feature = f;
        tree.nodes[idx].threshold = j["t"].get<double>();
        const int l = node_from_json(j["l"], tree);
        tree.nodes[idx].left = l;
        const int r = node_from_json(j["r"], tree);
        tree.nodes[idx].right = r;
        // reconstruct internal counts from the children
        tree.nodes[idx].n_success = tree.nodes[l].n_success + tree.nodes[r].n_success;
        tree.nodes[idx].n_failure = tree.nodes[l].n_failure + tree.nodes[r].n_failure;
    }
    return idx;
}

}  // namespace

const char* forest_kind_name(ForestKind k) {
    switch (k) {
        case ForestKind::Rf: return "rf";
        case ForestKind::Brf: return "brf";
        case ForestKind::CdBrf: return "cdbrf";
    }
    return "?";
}

ForestKind forest_kind_from_string(const std::string& s) {
    if (s == "rf") return ForestKind::Rf;
    if (s == "brf") return ForestKind::Brf;
    if (s == "cdbrf") return ForestKind::CdBrf;
    fail(CRX_E_INVALID_ARG, "unknown model kind '" + s + "' (expected rf|brf|cdbrf)");
}

int Hyperparameters::max_features_count() const {
    switch (max_features) {
        case MaxFeaturesRule::Sqrt:
            return std::max(1, static_cast<int>(std::sqrt(static_cast<double>(kNumFeatures))));
        case MaxFeaturesRule::Third:
            return std::max(1, kNumFeatures / 3);
    }
    return 1;
}

double Tree::predict(std::span<const double> row) const {
    int idx = 0;
    for (;;) {
        const TreeNode& node = nodes[static_cast<size_t>(idx)];
        if (node.is_leaf()) {
            const double n = static_cast<double>(node.n_success) + node.n_failure;
            return static_cast<double>(node.n_success) / n;
        }
        idx = row[static_cast<size_t>(node.feature)] < node.threshold ? node.left
                                                                      : node.right;
    }
}

bool ForestModel::rule_positive(std::span<const double> row) const {
    const double bw = row[kBwFeatureIndex];
    const double ga = row[kGaFeatureIndex];
    require(std::isfinite(bw) && std::isfinite(ga), CRX_E_MISSING_CLINICAL,
            "cdbrf prediction requires bw_g and ga_weeks");
    return ga >= rule.ga_min_weeks || bw > rule.bw_min_g;
}

double ForestModel::predict_proba(std::span<const double> row) const {
    require(row.size() == kNumFeatures, CRX_E_REGISTRY_MISMATCH,
            "predict: row length does not match the registry");
    if (kind == ForestKind::CdBrf && rule_positive(row)) return 1.0;
    double sum = 0.0;
    for (const auto& tree : trees) sum += tree.predict(row);
    return sum / static_cast<double>(trees.size());
}

Tree fit_tree(const FeatureMatrix& m, std::span<const size_t> row_multiset,
              std::span<const uint8_t> labels, const Hyperparameters& hp, Rng& rng) {
    require(!row_multiset.empty(), CRX_E_EMPTY_INPUT, "fit_tree: no rows");
    TreeBuilder builder{m, labels, hp, rng, {}};
    std::vector<size_t> rows(row_multiset.begin(), row_multiset.end());
    builder.build(rows, 0);
    return std::move(builder.tree);
}

std::vector<size_t> undersample_balanced(std::span<const uint8_t> labels,
                                         std::span<const size_t> rows, Rng& rng,
                                         bool with_replacement) {
    std::vector<size_t> succ, fail;
    for (size_t r : rows) (labels[r] ? succ : fail).push_back(r);
    require(!succ.empty() && !fail.empty(), CRX_E_SINGLE_CLASS,
            "undersample: both classes must be present");

    const bool fail_is_minority = fail.size() <= succ.size();
    auto& minority = fail_is_minority ? fail : succ;
    auto& majority = fail_is_minority ? succ : fail;
    const size_t n_min = minority.size();

    std::vector<size_t> out;
    out.reserve(2 * n_min);
    auto draw = [&](std::vector<size_t>& pool) {
        if (with_replacement) {
            for (size_t i = 0; i < n_min; ++i) out.push_back(pool[rng.bounded(pool.size())]);
        } else {
            rng.shuffle(pool);
            for (size_t i = 0; i < n_min; ++i) out.push_back(pool[i % pool.size()]);
        }
    };
    draw(minority);
    draw(majority);
    return out;
}

ForestModel fit_forest(const FeatureMatrix& m, const Hyperparameters& hp,
                       ForestKind kind, const ClinicalRule& rule, unsigned threads) {
    require(hp.n_trees >= 1, CRX_E_INVALID_ARG, "fit_forest: need at least one tree");
    require(hp.min_leaf >= 1, CRX_E_INVALID_ARG, "fit_forest: min_leaf must be >= 1");

    std::vector<uint8_t> labels(m.rows(), 0);
    for (size_t r = 0; r < m.rows(); ++r) {
        require(m.outcomes[r] != Outcome::Unknown, CRX_E_INVALID_ARG,
                "fit_forest: row " + m.patient_ids[r] + " has unknown outcome");
        labels[r] = m.outcomes[r] == Outcome::Success ? 1 : 0;
        for (int c = 0; c < kNumFeatures; ++c)
            require(!m.is_missing(r, c), CRX_E_INVALID_ARG,
                    "fit_forest: matrix must be imputed first");
    }

    std::vector<size_t> base_rows;
    for (size_t r = 0; r < m.rows(); ++r) base_rows.push_back(r);

    if (kind == ForestKind::CdBrf) {
        std::vector<size_t> kept;
        for (size_t r : base_rows) {
            const double bw = m.value(r, kBwFeatureIndex);
            const double ga = m.value(r, kGaFeatureIndex);
            if (!(ga >= rule.ga_min_weeks || bw > rule.bw_min_g)) kept.push_back(r);
        }
        require(!kept.empty(), CRX_E_EMPTY_AFTER_RULE,
                "cdbrf: no rows remain below the clinical rule");
        base_rows = std::move(kept);
    }

    if (kind == ForestKind::Brf || kind == ForestKind::CdBrf) {
        size_t n_s = 0;
        for (size_t r : base_rows) n_s += labels[r];
        require(n_s > 0 && n_s < base_rows.size(), CRX_E_SINGLE_CLASS,
                "fit_forest: both classes are required");
    }
    require(base_rows.size() >= 2, CRX_E_EMPTY_INPUT, "fit_forest: need at least 2 rows");

    ForestModel model;
    model.kind = kind;
    model.hp = hp;
    model.rule = rule;
    model.registry.assign(feature_names().begin(), feature_names().end());
    model.registry_hash = feature_registry_hash_hex();
    model.trees.resize(static_cast<size_t>(hp.n_trees));
    model.tree_train_class_counts.resize(static_cast<size_t>(hp.n_trees));

    parallel_for(static_cast<size_t>(hp.n_trees), threads, [&](size_t t) {
        Rng rng = Rng::stream(hp.seed, t);
        std::vector<size_t> draw;
        if (kind == ForestKind::Rf) {
            draw = bootstrap_rows(base_rows, rng, hp.rf_bootstrap);
        } else {
            draw = undersample_balanced(labels, base_rows, rng,
                                        hp.undersample_with_replacement);
        }
        uint32_t n_s = 0;
        for (size_t r : draw) n_s += labels[r];
        model.tree_train_class_counts[t] = {n_s, static_cast<uint32_t>(draw.size()) - n_s};
        if (kind != ForestKind::Rf) {
            // balanced by construction; keep the assertion hot
            require(2 * n_s == draw.size(), CRX_E_INTERNAL,
                    "fit_forest: undersample produced an unbalanced multiset");
        }
        model.trees[t] = fit_tree(m, draw, labels, hp, rng);
    });

    return model;
}

std::vector<double> feature_importance(const ForestModel& model) {
    std::vector<double> acc(kNumFeatures, 0.0);
    for (const auto& tree : model.trees) {
        const auto& root = tree.nodes[0];
        const double n_root = static_cast<double>(root.n_success) + root.n_failure;
        importance_walk(tree, 0, n_root, acc);
    }
    for (double& v : acc) v /= static_cast<double>(model.trees.size());
    double sum = 0.0;
    for (double v : acc) sum += v;
    if (sum > 0.0)
        for (double& v : acc) v /= sum;
    return acc;
}

void save_model(const std::string& path, const ForestModel& model,
                const nlohmann::ordered_json& run_config) {
    nlohmann::ordered_json j;
    j["format_version"] = kModelFormatVersion;
    j["kind"] = forest_kind_name(model.kind);
    nlohmann::ordered_json hp;
    hp["n_trees"] = model.hp.n_trees;
    hp["max_features"] = model.hp.max_features == MaxFeaturesRule::Sqrt ? "sqrt" : "third";
    hp["max_depth"] = model.hp.max_depth;
    hp["min_leaf"] = model.hp.min_leaf;
    hp["seed"] = model.hp.seed;
    hp["rf_bootstrap"] = model.hp.rf_bootstrap;
    hp["undersample_with_replacement"] = model.hp.undersample_with_replacement;
    j["hyperparameters"] = std::move(hp);
    if (model.kind == ForestKind::CdBrf) {
        j["clinical_rule"] = {{"ga_min_weeks", model.rule.ga_min_weeks},
                              {"bw_min_g", model.rule.bw_min_g}};
    } else {
        j["clinical_rule"] = nullptr;
    }
    j["registry"] = model.registry;
    j["registry_hash"] = model.registry_hash;
    j["imputation_table"] = model.imputation.to_json();
    j["tool_version"] = kToolVersion;
    j["run_config"] = run_config;
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& tree : model.trees) trees.push_back(node_to_json(tree, 0));
    j["trees"] = std::move(trees);

    std::ofstream out(path, std::ios::trunc);
    require(out.good(), CRX_E_IO, "cannot write " + path);
    out << j.dump(1) << '\n';
    out.flush();
    require(out.good(), CRX_E_IO, "write failed for " + path);
}

ForestModel load_model(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), CRX_E_IO, "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(CRX_E_CORRUPT_MODEL, path + ": not a valid model file (" + e.what() + ")");
    }

    require(j.contains("format_version") && j["format_version"].is_number_integer(),
            CRX_E_CORRUPT_MODEL, path + ": missing format_version");
    require(j["format_version"].get<int>() == kModelFormatVersion, CRX_E_VERSION_MISMATCH,
            path + ": model format_version " + j["format_version"].dump() +
                " is not supported (expected " + std::to_string(kModelFormatVersion) + ")");

    ForestModel model;
    try {
        model.kind = forest_kind_from_string(j.at("kind").get<std::string>());
        const auto& hp = j.at("hyperparameters");
        model.hp.n_trees = hp.at("n_trees").get<int>();
        const auto mf = hp.at("max_features").get<std::string>();
        require(mf == "sqrt" || mf == "third", CRX_E_CORRUPT_MODEL,
                path + ": bad max_features");
        model.hp.max_features = mf == "sqrt" ? MaxFeaturesRule::Sqrt : MaxFeaturesRule::Third;
        model.hp.max_depth = hp.at("max_depth").get<int>();
        model.hp.min_leaf = hp.at("min_leaf").get<int>();
        model.hp.seed = hp.at("seed").get<uint64_t>();
        model.hp.rf_bootstrap = hp.at("rf_bootstrap").get<bool>();
        model.hp.undersample_with_replacement =
            hp.at("undersample_with_replacement").get<bool>();
        if (model.kind == ForestKind::CdBrf) {
            model.rule.ga_min_weeks = j.at("clinical_rule").at("ga_min_weeks").get<double>();
            model.rule.bw_min_g = j.at("clinical_rule").at("bw_min_g").get<double>();
        }
        model.registry = j.at("registry").get<std::vector<std::string>>();
        require(model.registry.size() == kNumFeatures, CRX_E_CORRUPT_MODEL,
                path + ": registry must list " + std::to_string(kNumFeatures) + " features");
        model.registry_hash = j.at("registry_hash").get<std::string>();
        model.imputation = ImputationTable::from_json(j.at("imputation_table"));
        require(j.at("trees").is_array() && !j.at("trees").empty(), CRX_E_CORRUPT_MODEL,
                path + ": no trees");
        for (const auto& tj : j.at("trees")) {
            Tree tree;
            node_from_json(tj, tree);
            model.trees.push_back(std::move(tree));
        }
        require(model.trees.size() == static_cast<size_t>(model.hp.n_trees),
                CRX_E_CORRUPT_MODEL, path + ": tree count does not match hyperparameters");
    } catch (const Error&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        fail(CRX_E_CORRUPT_MODEL, path + ": malformed model (" + std::string(e.what()) + ")");
    }
    return model;
}

}  // namespace crx
