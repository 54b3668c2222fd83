#include "pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>

#include "csv.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "version.hpp"

namespace fs = std::filesystem;

namespace crx {

namespace {

void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), CRX_E_IO, "cannot write " + path);
    out << j.dump(1) << '\n';
    out.flush();
    require(out.good(), CRX_E_IO, "write failed for " + path);
}

// Provenance sidecar for CSV artifacts (JSON artifacts embed it directly).
void write_run_sidecar(const std::string& artifact_path, const RunConfig& cfg,
                       const nlohmann::ordered_json& invocation) {
    nlohmann::ordered_json j;
    j["tool_version"] = kToolVersion;
    j["invocation"] = invocation;
    j["run_config"] = cfg.to_json();
    write_json_file(artifact_path + ".run.json", j);
}

nlohmann::ordered_json rates_to_json(const RateMetrics& m) {
    nlohmann::ordered_json j;
    j["sensitivity"] = m.sensitivity ? nlohmann::ordered_json(*m.sensitivity)
                                     : nlohmann::ordered_json(nullptr);
    j["specificity"] = m.specificity ? nlohmann::ordered_json(*m.specificity)
                                     : nlohmann::ordered_json(nullptr);
    j["balanced_accuracy"] = m.balanced_accuracy
                                 ? nlohmann::ordered_json(*m.balanced_accuracy)
                                 : nlohmann::ordered_json(nullptr);
    j["tp"] = m.tp;
    j["fn"] = m.fn;
    j["tn"] = m.tn;
    j["fp"] = m.fp;
    return j;
}

nlohmann::ordered_json hp_to_json(const Hyperparameters& hp) {
    nlohmann::ordered_json j;
    j["n_trees"] = hp.n_trees;
    j["max_features"] = hp.max_features == MaxFeaturesRule::Sqrt ? "sqrt" : "third";
    j["max_depth"] = hp.max_depth;
    j["min_leaf"] = hp.min_leaf;
    j["seed"] = hp.seed;
    return j;
}

void write_roc_csv(const std::string& path, const std::vector<RocPoint>& points) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(points.size());
    for (const auto& p : points) {
        rows.push_back({std::isinf(p.threshold) ? "inf" : csv::format_double(p.threshold),
                        csv::format_double(p.fpr), csv::format_double(p.tpr)});
    }
    csv::write_file(path, {"threshold", "fpr", "tpr"}, rows);
}

std::string roc_path_for(const std::string& report_path) {
    fs::path p(report_path);
    p.replace_extension(".roc.csv");
    return p.string();
}

nlohmann::ordered_json report_to_json(const EvalReport& report, const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["tool_version"] = kToolVersion;
    j["kind"] = forest_kind_name(report.kind);
    j["run_config"] = cfg.to_json();
    j["chosen_hyperparameters"] = hp_to_json(report.chosen_hp);

    nlohmann::ordered_json grid = nlohmann::ordered_json::array();
    for (size_t si = 0; si < report.grid.size(); ++si) {
        const auto& entry = report.grid[si];
        nlohmann::ordered_json e;
        e["hyperparameters"] = hp_to_json(entry.hp);
        e["mean_balanced_accuracy"] = entry.mean_balanced_accuracy;
        nlohmann::ordered_json folds = nlohmann::ordered_json::array();
        for (const auto& f : entry.folds) {
            nlohmann::ordered_json fj = rates_to_json(f.at_threshold);
            fj["auc"] = f.auc ? nlohmann::ordered_json(*f.auc) : nlohmann::ordered_json(nullptr);
            if (si == report.best_grid_index)
                fj["imputation_table"] = f.imputation.to_json();
            folds.push_back(std::move(fj));
        }
        e["folds"] = std::move(folds);
        grid.push_back(std::move(e));
    }
    j["grid"] = std::move(grid);

    nlohmann::ordered_json pooled = rates_to_json(report.pooled_at_threshold);
    pooled["threshold"] = kDecisionThreshold;
    pooled["auc"] = report.pooled_roc.auc;
    pooled["best_balanced_accuracy_point"] = {
        {"threshold", report.best_balanced_accuracy_point.threshold},
        {"fpr", report.best_balanced_accuracy_point.fpr},
        {"tpr", report.best_balanced_accuracy_point.tpr}};
    j["pooled"] = std::move(pooled);

    nlohmann::ordered_json thresholds = nlohmann::ordered_json::array();
    for (const auto& p : report.pooled_roc.points) {
        thresholds.push_back({{"threshold", std::isinf(p.threshold)
                                                ? nlohmann::ordered_json(nullptr)
                                                : nlohmann::ordered_json(p.threshold)},
                              {"tp", p.tp},
                              {"fp", p.fp},
                              {"tn", p.tn},
                              {"fn", p.fn}});
    }
    j["per_threshold_confusion"] = std::move(thresholds);

    nlohmann::ordered_json resub = rates_to_json(report.resubstitution);
    resub["auc"] = report.resubstitution_auc
                       ? nlohmann::ordered_json(*report.resubstitution_auc)
                       : nlohmann::ordered_json(nullptr);
    j["resubstitution"] = std::move(resub);

    nlohmann::ordered_json imp;
    for (int c = 0; c < kNumFeatures; ++c)
        imp[feature_names()[c]] = report.importances[c];
    j["feature_importances"] = std::move(imp);
    return j;
}

std::array<double, 4> summary_from(const RateMetrics& m, double auc) {
    return {m.sensitivity.value_or(std::nan("")), m.specificity.value_or(std::nan("")),
            m.balanced_accuracy.value_or(std::nan("")), auc};
}

}  // namespace

std::vector<Hyperparameters> default_grid(const RunConfig& cfg) {
    std::vector<Hyperparameters> grid;
    for (int max_depth : {-1, 8}) {
        for (int min_leaf : {1, 5}) {
            Hyperparameters hp;
            hp.n_trees = 100;
            hp.max_features = MaxFeaturesRule::Sqrt;
            hp.max_depth = max_depth;
            hp.min_leaf = min_leaf;
            hp.seed = cfg.seed;
            hp.rf_bootstrap = cfg.rf_bootstrap;
            hp.undersample_with_replacement = cfg.undersample_with_replacement;
            grid.push_back(hp);
        }
    }
    return grid;
}

std::vector<Hyperparameters> load_grid(const std::string& path, const RunConfig& cfg) {
    std::ifstream in(path);
    require(in.good(), CRX_E_IO, "cannot open grid " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(CRX_E_PARSE, path + ": bad grid JSON (" + e.what() + ")");
    }
    require(j.is_array(), CRX_E_PARSE, path + ": grid must be a JSON array");
    require(!j.empty(), CRX_E_EMPTY_GRID, path + ": grid is empty");

    std::vector<Hyperparameters> grid;
    for (const auto& e : j) {
        Hyperparameters hp;
        hp.seed = cfg.seed;
        hp.rf_bootstrap = cfg.rf_bootstrap;
        hp.undersample_with_replacement = cfg.undersample_with_replacement;
        try {
            if (e.contains("n_trees")) hp.n_trees = e["n_trees"].get<int>();
            if (e.contains("max_features")) {
                const auto mf = e["max_features"].get<std::string>();
                require(mf == "sqrt" || mf == "third", CRX_E_PARSE,
                        path + ": max_features must be sqrt or third");
                hp.max_features = mf == "sqrt" ? MaxFeaturesRule::Sqrt
                                               : MaxFeaturesRule::Third;
            }
            if (e.contains("max_depth")) hp.max_depth = e["max_depth"].get<int>();
            if (e.contains("min_leaf")) hp.min_leaf = e["min_leaf"].get<int>();
        } catch (const nlohmann::json::exception& ex) {
            fail(CRX_E_PARSE, path + ": bad grid entry (" + std::string(ex.what()) + ")");
        }
        require(hp.n_trees >= 1 && hp.min_leaf >= 1, CRX_E_INVALID_ARG,
                path + ": n_trees and min_leaf must be >= 1");
        grid.push_back(hp);
    }
    return grid;
}

void run_synth(const RunConfig& cfg, const SynthParams& params,
               const std::string& out_dir) {
    auto plans = plan_cohort(params);
    fs::create_directories(out_dir);

    std::vector<Recording> header_only(plans.size());
    parallel_for(plans.size(), cfg.threads, [&](size_t i) {
        Recording rec = synth_recording(params, plans[i]);
        write_signal_csv((fs::path(out_dir) / (plans[i].id + ".csv")).string(), rec);
        // keep spans for the sidecar without holding every signal in memory
        header_only[i].patient_id = rec.patient_id;
        header_only[i].imv = rec.imv;
        header_only[i].ettcpap = rec.ettcpap;
    });

    write_epoch_sidecar((fs::path(out_dir) / "epochs.csv").string(), header_only);
    std::vector<ClinicalRecord> clinical;
    clinical.reserve(plans.size());
    for (const auto& p : plans) clinical.push_back(p.clinical);
    write_clinical_csv((fs::path(out_dir) / "clinical.csv").string(), clinical);

    nlohmann::ordered_json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["command"] = "synth";
    manifest["n_patients"] = params.n_patients;
    manifest["failure_rate"] = params.failure_rate;
    manifest["separability"] = params.separability;
    manifest["seed"] = params.seed;
    manifest["source_rate_hz"] = params.source_rate_hz;
    manifest["run_config"] = cfg.to_json();
    write_json_file((fs::path(out_dir) / "manifest.json").string(), manifest);
}

ExtractStats run_extract(const RunConfig& cfg, const std::string& signals_dir,
                         const std::string& epochs_csv, const std::string& clinical_csv,
                         const std::string& out_features_csv) {
    const auto epochs = load_epoch_sidecar(epochs_csv);
    const auto clinical = load_clinical_csv(clinical_csv);
    std::map<std::string, const ClinicalRecord*> clin_by_id;
    for (const auto& c : clinical) {
        require(!clin_by_id.count(c.patient_id), CRX_E_DUPLICATE_PATIENT,
                clinical_csv + ": duplicate patient " + c.patient_id);
        clin_by_id[c.patient_id] = &c;
    }

    std::vector<std::string> ids;
    for (const auto& [pid, spans] : epochs) ids.push_back(pid);  // map is sorted

    DumpOptions dumps;
    dumps.metrics = cfg.dump_metrics;
    dumps.peaks = cfg.dump_peaks;
    dumps.patterns = cfg.dump_patterns;
    const bool want_dumps = dumps.metrics || dumps.peaks || dumps.patterns;
    if (want_dumps) {
        dumps.dir = (fs::path(out_features_csv).parent_path() / "dumps").string();
        if (dumps.dir.empty()) dumps.dir = "dumps";
    }

    struct RowResult {
        bool ok = false;
        PatientFeatures features;
        std::string error;
    };
    std::vector<RowResult> results(ids.size());
    std::mutex log_mutex;

    parallel_for(ids.size(), cfg.threads, [&](size_t i) {
        const std::string& pid = ids[i];
        auto& slot = results[i];
        try {
            const auto it = clin_by_id.find(pid);
            require(it != clin_by_id.end(), CRX_E_UNKNOWN_PATIENT,
                    pid + ": no clinical record");
            const auto& spans = epochs.at(pid);
            const auto path = (fs::path(signals_dir) / (pid + ".csv")).string();
            Recording rec = load_recording(path, pid, spans.first, spans.second);
            slot.features =
                extract_patient_features(rec, cfg, want_dumps ? &dumps : nullptr);
            slot.ok = true;

            int n_missing = 0;
            for (int c = 0; c < kNumFeatures - 2; ++c) n_missing += slot.features.missing[c];
            if (n_missing > 0) {
                std::lock_guard<std::mutex> lock(log_mutex);
                std::fprintf(stderr, "extract: %s: %d feature(s) missing\n", pid.c_str(),
                             n_missing);
            }
        } catch (const std::exception& e) {
            slot.error = e.what();
            std::lock_guard<std::mutex> lock(log_mutex);
            std::fprintf(stderr, "extract: %s: skipped (%s)\n", pid.c_str(), e.what());
        }
    });

    FeatureMatrix m;
    ExtractStats stats;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (!results[i].ok) {
            ++stats.failed;
            continue;
        }
        const auto& clin = *clin_by_id.at(ids[i]);
        const size_t r = m.rows();
        m.add_row(ids[i], clin.outcome);
        for (int c = 0; c < kNumFeatures; ++c)
            if (!results[i].features.missing[c]) m.set(r, c, results[i].features.values[c]);
        m.set(r, kBwFeatureIndex, clin.bw_g);
        m.set(r, kGaFeatureIndex, clin.ga_weeks);
        ++stats.written;
    }
    require(stats.written > 0, CRX_E_EMPTY_INPUT,
            "extract: no patient could be processed");

    write_feature_csv(out_features_csv, m);
    nlohmann::ordered_json invocation;
    invocation["command"] = "extract";
    invocation["signals_dir"] = signals_dir;
    invocation["epochs"] = epochs_csv;
    invocation["clinical"] = clinical_csv;
    write_run_sidecar(out_features_csv, cfg, invocation);
    return stats;
}

std::array<double, 4> run_train(const RunConfig& cfg, const std::string& features_csv,
                                const std::string& kind_name, const std::string& grid_path,
                                const std::string& out_model,
                                const std::string& out_report) {
    const ForestKind kind = forest_kind_from_string(kind_name);
    FeatureMatrix m = read_feature_csv(features_csv);

    std::vector<size_t> labeled;
    for (size_t r = 0; r < m.rows(); ++r)
        if (m.outcomes[r] != Outcome::Unknown) labeled.push_back(r);
    if (labeled.size() != m.rows())
        std::fprintf(stderr, "train: ignoring %zu row(s) with unknown outcome\n",
                     m.rows() - labeled.size());
    require(!labeled.empty(), CRX_E_EMPTY_INPUT, "train: no labeled rows");
    FeatureMatrix labeled_m = subset_rows(m, labeled);

    const auto grid = grid_path.empty() ? default_grid(cfg) : load_grid(grid_path, cfg);
    const auto plan = stratified_folds(labeled_m.outcomes, cfg.folds, cfg.seed);
    if (plan.class_smaller_than_k)
        std::fprintf(stderr, "train: a class has fewer members than folds\n");

    auto [report, model] = grid_search(labeled_m, kind, grid, plan, cfg);
    save_model(out_model, model, cfg.to_json());
    write_json_file(out_report, report_to_json(report, cfg));
    write_roc_csv(roc_path_for(out_report), report.pooled_roc.points);
    return summary_from(report.pooled_at_threshold, report.pooled_roc.auc);
}

namespace {

void check_registry(const ForestModel& model) {
    require(model.registry.size() == kNumFeatures, CRX_E_REGISTRY_MISMATCH,
            "model registry has wrong feature count");
    for (int c = 0; c < kNumFeatures; ++c)
        require(model.registry[c] == feature_names()[c], CRX_E_REGISTRY_MISMATCH,
                "model registry disagrees at feature " + std::to_string(c) + " ('" +
                    model.registry[c] + "' vs '" + feature_names()[c] + "')");
}

}  // namespace

std::array<double, 4> run_evaluate(const RunConfig& cfg, const std::string& features_csv,
                                   const std::string& model_path,
                                   const std::string& out_report) {
    FeatureMatrix m = read_feature_csv(features_csv);
    ForestModel model = load_model(model_path);
    check_registry(model);

    impute_apply(m, model.imputation, {});  // prediction-mode imputation

    std::vector<size_t> labeled;
    for (size_t r = 0; r < m.rows(); ++r)
        if (m.outcomes[r] != Outcome::Unknown) labeled.push_back(r);
    require(!labeled.empty(), CRX_E_EMPTY_INPUT, "evaluate: no labeled rows");

    std::vector<uint8_t> truth, pred;
    std::vector<double> scores;
    for (size_t r : labeled) {
        const double p = model.predict_proba(m.row(r));
        scores.push_back(p);
        truth.push_back(m.outcomes[r] == Outcome::Success ? 1 : 0);
        pred.push_back(p >= kDecisionThreshold ? 1 : 0);
    }
    const auto rates = confusion_metrics(truth, pred);

    bool both_classes = false;
    {
        long p = 0;
        for (uint8_t t : truth) p += t;
        both_classes = p > 0 && p < static_cast<long>(truth.size());
    }
    std::optional<RocResult> roc;
    if (both_classes) roc = roc_auc(truth, scores);

    nlohmann::ordered_json j;
    j["tool_version"] = kToolVersion;
    j["command"] = "evaluate";
    j["model"] = model_path;
    j["kind"] = forest_kind_name(model.kind);
    j["run_config"] = cfg.to_json();
    j["n_rows"] = m.rows();
    j["n_labeled"] = labeled.size();
    nlohmann::ordered_json metrics = rates_to_json(rates);
    metrics["threshold"] = kDecisionThreshold;
    metrics["auc"] = roc ? nlohmann::ordered_json(roc->auc) : nlohmann::ordered_json(nullptr);
    j["metrics"] = std::move(metrics);
    write_json_file(out_report, j);
    if (roc) write_roc_csv(roc_path_for(out_report), roc->points);

    return summary_from(rates, roc ? roc->auc : std::nan(""));
}

void run_predict(const RunConfig& cfg, const std::string& features_csv,
                 const std::string& model_path, const std::string& out_csv) {
    FeatureMatrix m = read_feature_csv(features_csv);
    ForestModel model = load_model(model_path);
    check_registry(model);

    impute_apply(m, model.imputation, {});

    std::vector<std::vector<std::string>> rows;
    rows.reserve(m.rows());
    for (size_t r = 0; r < m.rows(); ++r) {
        const double p = model.predict_proba(m.row(r));
        rows.push_back({m.patient_ids[r], csv::format_double(p),
                        p >= kDecisionThreshold ? "success" : "failure"});
    }
    csv::write_file(out_csv, {"patient_id", "probability_success", "predicted_label"}, rows);

    nlohmann::ordered_json invocation;
    invocation["command"] = "predict";
    invocation["model"] = model_path;
    invocation["features"] = features_csv;
    write_run_sidecar(out_csv, cfg, invocation);
}

}  // namespace crx
