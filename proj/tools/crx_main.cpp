// crx command-line tool. Links only the public C API; all pipeline logic
// lives behind libcrx.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crx/crx.h"

namespace {

struct ConfigHandle {
    crx_config* cfg = crx_config_new();
    ~ConfigHandle() { crx_config_free(cfg); }
};

int fail_with(crx_status status) {
    std::fprintf(stderr, "error: %s: %s\n", crx_status_name(status), crx_last_error());
    return 1;
}

// Common flags shared by all subcommands; applied to the config after an
// optional config file so flags win.
struct CommonOpts {
    std::string config_path;
    int threads = -1;
    std::vector<std::string> set_kv;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "key=value config file");
        app->add_option("--threads", threads, "worker threads (0 = all cores)");
        app->add_option("--set", set_kv, "extra config override key=value")
            ->expected(-1);
    }

    crx_status apply(crx_config* cfg) const {
        crx_status s = CRX_OK;
        if (!config_path.empty()) {
            s = crx_config_load_file(cfg, config_path.c_str());
            if (s != CRX_OK) return s;
        }
        if (threads >= 0) {
            s = crx_config_set(cfg, "threads", std::to_string(threads).c_str());
            if (s != CRX_OK) return s;
        }
        for (const auto& kv : set_kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                std::fprintf(stderr, "error: --set expects key=value, got '%s'\n",
                             kv.c_str());
                return CRX_E_INVALID_ARG;
            }
            s = crx_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
            if (s != CRX_OK) return s;
        }
        return CRX_OK;
    }
};

void print_summary(const char* what, const double* m) {
    auto show = [](double v) { return std::isnan(v) ? -1.0 : v; };
    std::printf("%s: sensitivity=%.4f specificity=%.4f balanced_accuracy=%.4f auc=%.4f\n",
                what, show(m[0]), show(m[1]), show(m[2]), show(m[3]));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cardiorespiratory variability analysis and extubation-readiness "
                 "classification"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(crx_version()));

    // synth
    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic cohort");
    unsigned n_patients = 20;
    double failure_rate = 0.15, separability = 1.0;
    unsigned long long synth_seed = 1;
    std::string out_dir;
    synth->add_option("--patients", n_patients, "number of patients")->required();
    synth->add_option("--failure-rate", failure_rate, "failure fraction in (0,1)");
    synth->add_option("--separability", separability, "class separability dial (>= 0)");
    synth->add_option("--seed", synth_seed, "cohort seed")->required();
    synth->add_option("--out", out_dir, "output directory")->required();
    CommonOpts synth_common;
    synth_common.attach(synth);

    // extract
    auto* extract = app.add_subcommand("extract", "extract the 79-feature matrix");
    std::string signals_dir, epochs_csv, clinical_csv, features_out;
    bool dump_metrics = false, dump_peaks = false, dump_patterns = false;
    extract->add_option("--signals", signals_dir, "directory of per-patient signal CSVs")
        ->required();
    extract->add_option("--epochs", epochs_csv, "epoch sidecar CSV")->required();
    extract->add_option("--clinical", clinical_csv, "clinical CSV")->required();
    extract->add_option("--out", features_out, "output feature CSV")->required();
    extract->add_flag("--dump-metrics", dump_metrics, "write per-metric debug CSVs");
    extract->add_flag("--dump-peaks", dump_peaks, "write R-peak debug CSVs");
    extract->add_flag("--dump-patterns", dump_patterns, "write segmentation debug CSVs");
    bool patterns_full = false;
    extract->add_flag("--patterns-full-ettcpap", patterns_full,
                      "score patterns over the full ETT-CPAP instead of minutes 2-5");
    CommonOpts extract_common;
    extract_common.attach(extract);

    // train
    auto* train = app.add_subcommand("train", "cross-validated grid search and final fit");
    std::string train_features, model_kind = "brf", grid_path, model_out, report_out;
    int folds = -1;
    long long train_seed = -1;
    train->add_option("--features", train_features, "feature CSV")->required();
    train->add_option("--model", model_kind, "rf|brf|cdbrf")->required();
    train->add_option("--grid", grid_path, "hyperparameter grid JSON");
    train->add_option("--folds", folds, "cross-validation folds");
    train->add_option("--seed", train_seed, "training seed");
    bool undersample_wo_repl = false, rf_subset = false;
    train->add_flag("--undersample-without-replacement", undersample_wo_repl,
                    "draw the balanced per-tree samples without replacement");
    train->add_flag("--rf-subset", rf_subset,
                    "give rf trees a 63.2% subset instead of a bootstrap");
    train->add_option("--out", model_out, "output model JSON")->required();
    train->add_option("--report", report_out, "output report JSON")->required();
    CommonOpts train_common;
    train_common.attach(train);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a stored model");
    std::string eval_features, eval_model, eval_report;
    evaluate->add_option("--features", eval_features, "feature CSV")->required();
    evaluate->add_option("--model", eval_model, "model JSON")->required();
    evaluate->add_option("--out", eval_report, "output report JSON")->required();
    CommonOpts eval_common;
    eval_common.attach(evaluate);

    // predict
    auto* predict = app.add_subcommand("predict", "per-patient success probabilities");
    std::string pred_features, pred_model, pred_out;
    predict->add_option("--features", pred_features, "feature CSV")->required();
    predict->add_option("--model", pred_model, "model JSON")->required();
    predict->add_option("--out", pred_out, "output prediction CSV")->required();
    CommonOpts pred_common;
    pred_common.attach(predict);

    CLI11_PARSE(app, argc, argv);

    ConfigHandle handle;
    crx_status status = CRX_OK;

    if (synth->parsed()) {
        status = synth_common.apply(handle.cfg);
        if (status == CRX_OK)
            status = crx_synth(handle.cfg, n_patients, failure_rate, separability,
                               synth_seed, out_dir.c_str());
        if (status != CRX_OK) return fail_with(status);
        std::printf("synth: wrote %u patients to %s\n", n_patients, out_dir.c_str());
    } else if (extract->parsed()) {
        status = extract_common.apply(handle.cfg);
        if (status == CRX_OK && dump_metrics)
            status = crx_config_set(handle.cfg, "dump_metrics", "1");
        if (status == CRX_OK && dump_peaks)
            status = crx_config_set(handle.cfg, "dump_peaks", "1");
        if (status == CRX_OK && dump_patterns)
            status = crx_config_set(handle.cfg, "dump_patterns", "1");
        if (status == CRX_OK && patterns_full)
            status = crx_config_set(handle.cfg, "patterns_full_ettcpap", "1");
        unsigned written = 0, failed = 0;
        if (status == CRX_OK)
            status = crx_extract(handle.cfg, signals_dir.c_str(), epochs_csv.c_str(),
                                 clinical_csv.c_str(), features_out.c_str(), &written,
                                 &failed);
        if (status != CRX_OK) return fail_with(status);
        std::printf("extract: %u patient(s) written, %u skipped -> %s\n", written, failed,
                    features_out.c_str());
    } else if (train->parsed()) {
        status = train_common.apply(handle.cfg);
        if (status == CRX_OK && folds > 0)
            status = crx_config_set(handle.cfg, "folds", std::to_string(folds).c_str());
        if (status == CRX_OK && train_seed >= 0)
            status = crx_config_set(handle.cfg, "seed", std::to_string(train_seed).c_str());
        if (status == CRX_OK && undersample_wo_repl)
            status = crx_config_set(handle.cfg, "undersample_with_replacement", "0");
        if (status == CRX_OK && rf_subset)
            status = crx_config_set(handle.cfg, "rf_bootstrap", "0");
        double summary[4] = {0, 0, 0, 0};
        if (status == CRX_OK)
            status = crx_train(handle.cfg, train_features.c_str(), model_kind.c_str(),
                               grid_path.empty() ? nullptr : grid_path.c_str(),
                               model_out.c_str(), report_out.c_str(), summary);
        if (status != CRX_OK) return fail_with(status);
        print_summary("train (pooled cv)", summary);
    } else if (evaluate->parsed()) {
        status = eval_common.apply(handle.cfg);
        double summary[4] = {0, 0, 0, 0};
        if (status == CRX_OK)
            status = crx_evaluate(handle.cfg, eval_features.c_str(), eval_model.c_str(),
                                  eval_report.c_str(), summary);
        if (status != CRX_OK) return fail_with(status);
        print_summary("evaluate", summary);
    } else if (predict->parsed()) {
        status = pred_common.apply(handle.cfg);
        if (status == CRX_OK)
            status = crx_predict(handle.cfg, pred_features.c_str(), pred_model.c_str(),
                                 pred_out.c_str());
        if (status != CRX_OK) return fail_with(status);
        std::printf("predict: wrote %s\n", pred_out.c_str());
    }

    return 0;
}
