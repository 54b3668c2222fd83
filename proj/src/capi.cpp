#include "crx/crx.h"

#include <cstring>
#include <string>

#include "config.hpp"
#include "errors.hpp"
#include "forest.hpp"
#include "pipeline.hpp"
#include "version.hpp"

// extern-C surface: every entry point traps exceptions from the core and
// converts them into a status code plus a thread-local message.

namespace {

thread_local std::string t_last_error;

crx_status trap(const std::function<void()>& body) {
    try {
        body();
        t_last_error.clear();
        return CRX_OK;
    } catch (const crx::Error& e) {
        t_last_error = e.what();
        return e.code();
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return CRX_E_INTERNAL;
    } catch (...) {
        t_last_error = "unknown error";
        return CRX_E_INTERNAL;
    }
}

}  // namespace

struct crx_config {
    crx::RunConfig cfg;
};

struct crx_model {
    crx::ForestModel model;
};

extern "C" {

const char* crx_version(void) { return crx::kToolVersion; }

const char* crx_last_error(void) { return t_last_error.c_str(); }

const char* crx_status_name(crx_status s) {
    switch (s) {
        case CRX_OK: return "ok";
        case CRX_E_INVALID_ARG: return "invalid_argument";
        case CRX_E_IO: return "io_error";
        case CRX_E_PARSE: return "parse_error";
        case CRX_E_MISSING_CHANNEL: return "missing_channel";
        case CRX_E_NONUNIFORM_RATE: return "non_uniform_rate";
        case CRX_E_EPOCH_OUT_OF_RANGE: return "epoch_out_of_range";
        case CRX_E_SHORT_ETTCPAP: return "short_ettcpap";
        case CRX_E_UPSAMPLING_REQUESTED: return "upsampling_requested";
        case CRX_E_INVALID_RATE: return "invalid_rate";
        case CRX_E_TOO_SHORT: return "too_short";
        case CRX_E_LENGTH_MISMATCH: return "length_mismatch";
        case CRX_E_TOO_FEW_PEAKS: return "too_few_peaks";
        case CRX_E_NO_PEAKS_FOUND: return "no_peaks_found";
        case CRX_E_INSUFFICIENT_VALID_SAMPLES: return "insufficient_valid_samples";
        case CRX_E_UNKNOWN_PATIENT: return "unknown_patient";
        case CRX_E_DUPLICATE_PATIENT: return "duplicate_patient";
        case CRX_E_ALL_MISSING_FEATURE: return "all_missing_feature";
        case CRX_E_SCHEMA_MISMATCH: return "schema_mismatch";
        case CRX_E_EMPTY_INPUT: return "empty_input";
        case CRX_E_SINGLE_CLASS: return "single_class";
        case CRX_E_EMPTY_AFTER_RULE: return "empty_after_rule";
        case CRX_E_REGISTRY_MISMATCH: return "registry_mismatch";
        case CRX_E_MISSING_CLINICAL: return "missing_clinical";
        case CRX_E_EMPTY_GRID: return "empty_grid";
        case CRX_E_VERSION_MISMATCH: return "version_mismatch";
        case CRX_E_CORRUPT_MODEL: return "corrupt_model";
        case CRX_E_INTERNAL: return "internal_error";
    }
    return "unknown_status";
}

crx_config* crx_config_new(void) { return new crx_config(); }

void crx_config_free(crx_config* cfg) { delete cfg; }

crx_status crx_config_load_file(crx_config* cfg, const char* path) {
    if (!cfg || !path) {
        t_last_error = "null argument";
        return CRX_E_INVALID_ARG;
    }
    return trap([&] { cfg->cfg.load_file(path); });
}

crx_status crx_config_set(crx_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) {
        t_last_error = "null argument";
        return CRX_E_INVALID_ARG;
    }
    return trap([&] { cfg->cfg.set(key, value); });
}

crx_status crx_synth(const crx_config* cfg, unsigned n_patients, double failure_rate,
                     double separability, unsigned long long seed, const char* out_dir) {
    if (!cfg || !out_dir) {
        t_last_error = "null argument";
        return CRX_E_INVALID_ARG;
    }
    return trap([&] {
        crx::SynthParams p;
        p.n_patients = n_patients;
        p.failure_rate = failure_rate;
        p.separability = separability;
        p.seed = seed;
        crx::run_synth(cfg->cfg, p, out_dir);
    });
}

crx_status crx_extract(const crx_config* cfg, const char* signals_dir,
                       const char* epochs_csv, const char* clinical_csv,
                       const char* out_features_csv, unsigned* out_rows_written,
                       unsigned* out_rows_failed) {
    if (!cfg || !signals_dir || !epochs_csv || !clinical_csv || !out_features_csv) {
        t_last_error = "null argument";
        return CRX_E_INVALID_ARG;
    }
    return trap([&] {
        const auto stats =
            crx::run_extract(cfg->cfg, signals_dir, epochs_csv, clinical_csv, out_features_csv);
        if (out_rows_written) *out_rows_written = stats.written;
        if (out_rows_failed) *out_rows_failed = stats.failed;
    });
}

crx_status crx_train(const crx_config* cfg, const char* features_csv,
                     const char* model_kind, const char* grid_path,
                     const char* out_model_path, const char* out_report_path,
                     double* out_summary4) {
    if (!cfg || !features_csv || !model_kind || !out_model_path || !out_report_path) {
        t_last_error = "null argument";
        return CRX_E_INVALID_ARG;
    }
    return trap([&] {
        const auto summary =
            crx::run_train(cfg->cfg, features_csv, model_kind,
                           grid_path ? grid_path : "", out_model_path, out_report_path);
        if (out_summary4)
            for (int i = 0; i < 4; ++i) out_summary4[i] = summary[i];
    });
}

crx_status crx_evaluate(const crx_config* cfg, const char* features_csv,
                        const char* model_path, const char* out_report_path,
                        double* out_summary4) {
    if (!cfg || !features_csv || !model_path || !out_report_path) {
        t_last_error = "null argument";
        return CRX_E_INVALID_ARG;
    }
    return trap([&] {
        const auto summary =
            crx::run_evaluate(cfg->cfg, features_csv, model_path, out_report_path);
        if (out_summary4)
            for (int i = 0; i < 4; ++i) out_summary4[i] = summary[i];
    });
}

crx_status crx_predict(const crx_config* cfg, const char* features_csv,
                       const char* model_path, const char* out_csv) {
    if (!cfg || !features_csv || !model_path || !out_csv) {
        t_last_error = "null argument";
        return CRX_E_INVALID_ARG;
    }
    return trap([&] { crx::run_predict(cfg->cfg, features_csv, model_path, out_csv); });
}

crx_status crx_model_open(const char* path, crx_model** out) {
    if (!path || !out) {
        t_last_error = "null argument";
        return CRX_E_INVALID_ARG;
    }
    *out = nullptr;
    return trap([&] {
        auto* handle = new crx_model{crx::load_model(path)};
        *out = handle;
    });
}

void crx_model_close(crx_model* model) { delete model; }

const char* crx_model_kind(const crx_model* model) {
    return model ? crx::forest_kind_name(model->model.kind) : "";
}

int crx_model_feature_count(const crx_model* model) {
    return model ? static_cast<int>(model->model.registry.size()) : 0;
}

const char* crx_model_feature_name(const crx_model* model, int index) {
    if (!model || index < 0 || index >= static_cast<int>(model->model.registry.size()))
        return "";
    return model->model.registry[static_cast<size_t>(index)].c_str();
}

crx_status crx_model_predict(const crx_model* model, const double* features,
                             size_t n_features, double* out_prob_success) {
    if (!model || !features || !out_prob_success) {
        t_last_error = "null argument";
        return CRX_E_INVALID_ARG;
    }
    return trap([&] {
        crx::require(n_features == model->model.registry.size(), CRX_E_REGISTRY_MISMATCH,
                     "feature count does not match the model registry");
        // fill missing (NaN) entries from the stored table, prediction-mode
        std::vector<double> row(features, features + n_features);
        for (size_t c = 0; c < n_features; ++c) {
            if (std::isnan(row[c])) {
                crx::require(model->model.imputation.has_overall[c] != 0,
                             CRX_E_ALL_MISSING_FEATURE,
                             "no imputation value stored for feature " + std::to_string(c));
                row[c] = model->model.imputation.overall[c];
            }
        }
        *out_prob_success = model->model.predict_proba(row);
    });
}

}  // extern "C"
