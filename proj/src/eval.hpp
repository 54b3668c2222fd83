#pragma once

#include <optional>
#include <span>
#include <vector>

#include "config.hpp"
#include "forest.hpp"

namespace crx {

// Stratified k-fold plan: indices are shuffled within each class by the
// seed and dealt round-robin, so per-fold class counts stay within one of
// proportional.
struct FoldPlan {
    int k = 5;
    uint64_t seed = 0;
    std::vector<std::vector<size_t>> test_folds;
    bool class_smaller_than_k = false;  // warning flag, folds are still assigned
};

FoldPlan stratified_folds(std::span<const Outcome> labels, int k, uint64_t seed);

// Success is the positive class everywhere below.
struct RateMetrics {
    std::optional<double> sensitivity;        // success detection rate
    std::optional<double> specificity;        // failure detection rate
    std::optional<double> balanced_accuracy;  // mean of the two
    long tp = 0, fn = 0, tn = 0, fp = 0;
};

RateMetrics confusion_metrics(std::span<const uint8_t> truth_success,
                              std::span<const uint8_t> predicted_success);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct RocResult {
    std::vector<RocPoint> points;  // from (0,0) to (1,1), threshold descending
    double auc = 0.5;
};

// Thresholds at every distinct score plus a +inf sentinel; trapezoidal AUC
// (equal to the tie-adjusted pairwise concordance statistic).
RocResult roc_auc(std::span<const uint8_t> truth_success, std::span<const double> scores);

struct FoldOutcome {
    RateMetrics at_threshold;
    std::optional<double> auc;
    ImputationTable imputation;  // fitted on this fold's training rows only
};

struct GridEntryResult {
    Hyperparameters hp;
    double mean_balanced_accuracy = 0.0;
    std::vector<FoldOutcome> folds;
};

struct EvalReport {
    Hyperparameters chosen_hp;
    ForestKind kind = ForestKind::Rf;
    std::vector<GridEntryResult> grid;
    size_t best_grid_index = 0;

    // pooled cross-fold predictions of the winning setting
    RateMetrics pooled_at_threshold;
    RocResult pooled_roc;
    RocPoint best_balanced_accuracy_point;

    // winner refit on all rows and resubstituted (reproducible by `evaluate`
    // on the same features)
    RateMetrics resubstitution;
    std::optional<double> resubstitution_auc;

    std::vector<double> importances;  // from the final model
};

// Decision threshold on the averaged success probability.
constexpr double kDecisionThreshold = 0.5;

// Cross-validated grid search; returns the report and the final model refit
// on all rows with the winning hyperparameters. Imputation is fit on each
// fold's training rows only.
std::pair<EvalReport, ForestModel> grid_search(const FeatureMatrix& matrix,
                                               ForestKind kind,
                                               std::span<const Hyperparameters> grid,
                                               const FoldPlan& plan,
                                               const RunConfig& cfg);

// Fold-level fit/predict used by grid_search; exposed for the leakage tests.
struct FoldEval {
    std::vector<double> test_scores;
    std::vector<size_t> test_rows;
    FoldOutcome outcome;
};
FoldEval evaluate_fold(const FeatureMatrix& matrix, ForestKind kind,
                       Hyperparameters hp, const FoldPlan& plan, size_t fold_index,
                       const RunConfig& cfg);

}  // namespace crx
