#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "features.hpp"
#include "rng.hpp"

#include <json.hpp>

namespace crx {

constexpr int kModelFormatVersion = 1;

enum class ForestKind : int { Rf = 0, Brf = 1, CdBrf = 2 };
const char* forest_kind_name(ForestKind k);
ForestKind forest_kind_from_string(const std::string& s);

enum class MaxFeaturesRule : int { Sqrt = 0, Third = 1 };

struct Hyperparameters {
    int n_trees = 100;
    MaxFeaturesRule max_features = MaxFeaturesRule::Sqrt;
    int max_depth = -1;  // -1 = unlimited
    int min_leaf = 1;
    uint64_t seed = 0;
    bool rf_bootstrap = true;                  // false: 63.2% subset w/o replacement
    bool undersample_with_replacement = true;

    int max_features_count() const;  // resolved against kNumFeatures
    bool unlimited_depth() const { return max_depth < 0; }
};

// Flat node array per tree; root at index 0. Leaves have feature == -1 and
// carry the training class counts; rows go left when value < threshold.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    uint32_t n_success = 0;
    uint32_t n_failure = 0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(std::span<const double> row) const;  // P(success)
};

struct ClinicalRule {
    double ga_min_weeks = 27.0;
    double bw_min_g = 1000.0;
};

struct ForestModel {
    ForestKind kind = ForestKind::Rf;
    Hyperparameters hp;
    std::vector<Tree> trees;
    ClinicalRule rule;  // meaningful for CdBrf only
    ImputationTable imputation;
    std::vector<std::string> registry;      // feature names at fit time
    std::string registry_hash;

    // fit-time diagnostics, not serialized
    std::vector<std::pair<uint32_t, uint32_t>> tree_train_class_counts;

    // P(success) for one imputed feature row (throws on NaN clinical values
    // for CdBrf).
    double predict_proba(std::span<const double> row) const;

    bool rule_positive(std::span<const double> row) const;
};

// Label convention throughout: 1 = success, 0 = failure.
Tree fit_tree(const FeatureMatrix& m, std::span<const size_t> row_multiset,
              std::span<const uint8_t> labels, const Hyperparameters& hp, Rng& rng);

// Balanced bootstrap: n_min draws with replacement from each class, where
// n_min is the minority count.
std::vector<size_t> undersample_balanced(std::span<const uint8_t> labels,
                                         std::span<const size_t> rows, Rng& rng,
                                         bool with_replacement);

ForestModel fit_forest(const FeatureMatrix& m, const Hyperparameters& hp,
                       ForestKind kind, const ClinicalRule& rule,
                       unsigned threads = 1);

// Mean decrease in Gini impurity, weighted by node sample fraction,
// averaged over trees and normalized to sum 1. Unused features are
// exactly 0.
std::vector<double> feature_importance(const ForestModel& model);

void save_model(const std::string& path, const ForestModel& model,
                const nlohmann::ordered_json& run_config);
ForestModel load_model(const std::string& path);

}  // namespace crx
