#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "errors.hpp"
#include "parallel.hpp"

namespace crx {

namespace {

// unlimited depth sorts above any finite depth
long depth_rank(const Hyperparameters& hp) {
    return hp.unlimited_depth() ? std::numeric_limits<long>::max() : hp.max_depth;
}

bool wins_tie(const Hyperparameters& a, const Hyperparameters& b) {
    if (a.n_trees != b.n_trees) return a.n_trees < b.n_trees;
    if (depth_rank(a) != depth_rank(b)) return depth_rank(a) < depth_rank(b);
    return a.min_leaf > b.min_leaf;
}

uint64_t fold_seed(uint64_t base_seed, size_t setting, size_t fold) {
    return Rng::stream(base_seed, 0xC5000000ull + setting * 1024 + fold).next_u64();
}

}  // namespace

FoldPlan stratified_folds(std::span<const Outcome> labels, int k, uint64_t seed) {
    require(k >= 2, CRX_E_INVALID_ARG, "stratified_folds: k must be >= 2");
    require(!labels.empty(), CRX_E_EMPTY_INPUT, "stratified_folds: no rows");

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.test_folds.assign(static_cast<size_t>(k), {});

    Rng rng = Rng::stream(seed, 0xF01D);
    for (int cls = 0; cls < 3; ++cls) {
        std::vector<size_t> members;
        for (size_t i = 0; i < labels.size(); ++i)
            if (static_cast<int>(labels[i]) == cls) members.push_back(i);
        if (members.empty()) continue;
        if (members.size() < static_cast<size_t>(k)) plan.class_smaller_than_k = true;
        rng.shuffle(members);
        for (size_t i = 0; i < members.size(); ++i)
            plan.test_folds[i % static_cast<size_t>(k)].push_back(members[i]);
    }
    for (auto& fold : plan.test_folds) std::sort(fold.begin(), fold.end());
    return plan;
}

RateMetrics confusion_metrics(std::span<const uint8_t> truth,
                              std::span<const uint8_t> predicted) {
    require(!truth.empty(), CRX_E_EMPTY_INPUT, "confusion_metrics: empty input");
    require(truth.size() == predicted.size(), CRX_E_LENGTH_MISMATCH,
            "confusion_metrics: length mismatch");
    RateMetrics m;
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] && predicted[i]) ++m.tp;
        else if (truth[i] && !predicted[i]) ++m.fn;
        else if (!truth[i] && !predicted[i]) ++m.tn;
        else ++m.fp;
    }
    if (m.tp + m.fn > 0)
        m.sensitivity = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    if (m.tn + m.fp > 0)
        m.specificity = static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fp);
    if (m.sensitivity && m.specificity)
        m.balanced_accuracy = 0.5 * (*m.sensitivity + *m.specificity);
    return m;
}

RocResult roc_auc(std::span<const uint8_t> truth, std::span<const double> scores) {
    require(truth.size() == scores.size() && !truth.empty(), CRX_E_LENGTH_MISMATCH,
            "roc_auc: bad inputs");
    long pos = 0;
    for (uint8_t t : truth) pos += t ? 1 : 0;
    const long neg = static_cast<long>(truth.size()) - pos;
    require(pos > 0 && neg > 0, CRX_E_SINGLE_CLASS,
            "roc_auc: both classes must be present");

    std::vector<size_t> order(truth.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    RocResult out;
    auto push_point = [&](double thr, long tp, long fp) {
        RocPoint p;
        p.threshold = thr;
        p.tp = tp;
        p.fp = fp;
        p.fn = pos - tp;
        p.tn = neg - fp;
        p.fpr = static_cast<double>(fp) / static_cast<double>(neg);
        p.tpr = static_cast<double>(tp) / static_cast<double>(pos);
        out.points.push_back(p);
    };

    push_point(std::numeric_limits<double>::infinity(), 0, 0);
    long tp = 0, fp = 0;
    double auc_num = 0.0;  // exact in doubles: integer-valued accumulation
    size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        long d_tp = 0, d_fp = 0;
        while (i < order.size() && scores[order[i]] == s) {
            (truth[order[i]] ? d_tp : d_fp) += 1;
            ++i;
        }
        const long tp2 = tp + d_tp, fp2 = fp + d_fp;
        auc_num += static_cast<double>(fp2 - fp) * static_cast<double>(tp + tp2);
        tp = tp2;
        fp = fp2;
        push_point(s, tp, fp);
    }
    out.auc = auc_num / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
    return out;
}

FoldEval evaluate_fold(const FeatureMatrix& matrix, ForestKind kind, Hyperparameters hp,
                       const FoldPlan& plan, size_t fold_index, const RunConfig& cfg) {
    const auto& test = plan.test_folds[fold_index];
    std::vector<uint8_t> is_test(matrix.rows(), 0);
    for (size_t r : test) is_test[r] = 1;
    std::vector<size_t> train;
    for (size_t r = 0; r < matrix.rows(); ++r)
        if (!is_test[r]) train.push_back(r);
    require(!train.empty() && !test.empty(), CRX_E_EMPTY_INPUT,
            "evaluate_fold: empty train or test set");

    FeatureMatrix work = matrix;
    auto table = impute_fit(work, train);
    impute_apply(work, table, train);

    ClinicalRule rule{cfg.rule_ga_min_weeks, cfg.rule_bw_min_g};
    auto model = fit_forest(subset_rows(work, train), hp, kind, rule, 1);

    FoldEval fe;
    fe.test_rows = test;
    fe.outcome.imputation = table;
    std::vector<uint8_t> truth, pred;
    for (size_t r : test) {
        const double p = model.predict_proba(work.row(r));
        fe.test_scores.push_back(p);
        truth.push_back(matrix.outcomes[r] == Outcome::Success ? 1 : 0);
        pred.push_back(p >= kDecisionThreshold ? 1 : 0);
    }
    fe.outcome.at_threshold = confusion_metrics(truth, pred);
    bool both = false;
    {
        long p = 0;
        for (uint8_t t : truth) p += t;
        both = p > 0 && p < static_cast<long>(truth.size());
    }
    if (both) fe.outcome.auc = roc_auc(truth, fe.test_scores).auc;
    return fe;
}

std::pair<EvalReport, ForestModel> grid_search(const FeatureMatrix& matrix,
                                               ForestKind kind,
                                               std::span<const Hyperparameters> grid,
                                               const FoldPlan& plan,
                                               const RunConfig& cfg) {
    require(!grid.empty(), CRX_E_EMPTY_GRID, "grid_search: empty hyperparameter grid");

    // Tiny cohorts can leave round-robin folds empty; those folds carry no
    // test information and are skipped.
    FoldPlan active = plan;
    std::erase_if(active.test_folds, [](const auto& f) { return f.empty(); });
    if (active.test_folds.size() != plan.test_folds.size())
        std::fprintf(stderr, "grid_search: skipping %zu empty fold(s)\n",
                      plan.test_folds.size() - active.test_folds.size());
    const size_t k = active.test_folds.size();
    require(k >= 2, CRX_E_EMPTY_INPUT, "grid_search: fewer than 2 usable folds");

    // settings x folds, embarrassingly parallel, reduced by fixed index
    std::vector<FoldEval> evals(grid.size() * k);
    parallel_for(evals.size(), cfg.threads, [&](size_t task) {
        const size_t si = task / k;
        const size_t fi = task % k;
        Hyperparameters hp = grid[si];
        hp.seed = fold_seed(grid[si].seed, si, fi);
        evals[task] = evaluate_fold(matrix, kind, hp, active, fi, cfg);
    });

    EvalReport report;
    report.kind = kind;
    report.grid.resize(grid.size());
    for (size_t si = 0; si < grid.size(); ++si) {
        auto& entry = report.grid[si];
        entry.hp = grid[si];
        double sum = 0.0;
        int defined = 0;
        for (size_t fi = 0; fi < k; ++fi) {
            const auto& fe = evals[si * k + fi];
            entry.folds.push_back(fe.outcome);
            if (fe.outcome.at_threshold.balanced_accuracy) {
                sum += *fe.outcome.at_threshold.balanced_accuracy;
                ++defined;
            }
        }
        entry.mean_balanced_accuracy = defined > 0 ? sum / defined : -1.0;
    }

    size_t best = 0;
    for (size_t si = 1; si < grid.size(); ++si) {
        const double a = report.grid[si].mean_balanced_accuracy;
        const double b = report.grid[best].mean_balanced_accuracy;
        if (a > b || (a == b && wins_tie(grid[si], grid[best]))) best = si;
    }
    report.best_grid_index = best;
    report.chosen_hp = grid[best];

    // pooled cross-fold predictions of the winner feed the headline ROC
    std::vector<uint8_t> truth(matrix.rows(), 0), pred(matrix.rows(), 0);
    std::vector<double> scores(matrix.rows(), 0.0);
    for (size_t fi = 0; fi < k; ++fi) {
        const auto& fe = evals[best * k + fi];
        for (size_t j = 0; j < fe.test_rows.size(); ++j) {
            const size_t r = fe.test_rows[j];
            truth[r] = matrix.outcomes[r] == Outcome::Success ? 1 : 0;
            scores[r] = fe.test_scores[j];
            pred[r] = fe.test_scores[j] >= kDecisionThreshold ? 1 : 0;
        }
    }
    report.pooled_at_threshold = confusion_metrics(truth, pred);
    report.pooled_roc = roc_auc(truth, scores);
    {
        const auto& pts = report.pooled_roc.points;
        size_t arg = 0;
        double bestba = -1.0;
        for (size_t i = 0; i < pts.size(); ++i) {
            const double ba = 0.5 * (pts[i].tpr + 1.0 - pts[i].fpr);
            if (ba > bestba) {
                bestba = ba;
                arg = i;
            }
        }
        report.best_balanced_accuracy_point = pts[arg];
    }

    // final model: refit on everything with the winning setting
    std::vector<size_t> all_rows(matrix.rows());
    for (size_t r = 0; r < matrix.rows(); ++r) all_rows[r] = r;
    FeatureMatrix full = matrix;
    auto table = impute_fit(full, all_rows);
    impute_apply(full, table, all_rows);
    ClinicalRule rule{cfg.rule_ga_min_weeks, cfg.rule_bw_min_g};
    ForestModel final_model = fit_forest(full, report.chosen_hp, kind, rule, cfg.threads);
    final_model.imputation = table;

    // Resubstitution is scored the way a deployed predictor would see the
    // rows (prediction-mode imputation), so `evaluate` on the training
    // features reproduces it exactly.
    FeatureMatrix pred_view = matrix;
    impute_apply(pred_view, table, {});
    std::vector<uint8_t> resub_pred(matrix.rows(), 0);
    std::vector<double> resub_scores(matrix.rows(), 0.0);
    for (size_t r = 0; r < matrix.rows(); ++r) {
        resub_scores[r] = final_model.predict_proba(pred_view.row(r));
        resub_pred[r] = resub_scores[r] >= kDecisionThreshold ? 1 : 0;
    }
    report.resubstitution = confusion_metrics(truth, resub_pred);
    report.resubstitution_auc = roc_auc(truth, resub_scores).auc;
    report.importances = feature_importance(final_model);

    return {std::move(report), std::move(final_model)};
}

}  // namespace crx
