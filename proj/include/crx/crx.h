#ifndef CRX_H
#define CRX_H

/*
 * crx - cardiorespiratory variability analysis and extubation-readiness
 * classification for multichannel neonatal recordings.
 *
 * C interface to the crx core. Every entry point returns a crx_status;
 * on failure, crx_last_error() returns a message for the calling thread.
 * Handles created by *_new / *_open are owned by the caller and released
 * with the matching *_free / *_close.
 */

#include <stddef.h>

#if defined(_WIN32)
#define CRX_API __declspec(dllexport)
#else
#define CRX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum crx_status {
    CRX_OK = 0,
    CRX_E_INVALID_ARG = 1,
    CRX_E_IO = 2,
    CRX_E_PARSE = 3,

    /* recording ingest */
    CRX_E_MISSING_CHANNEL = 10,
    CRX_E_NONUNIFORM_RATE = 11,
    CRX_E_EPOCH_OUT_OF_RANGE = 12,
    CRX_E_SHORT_ETTCPAP = 13,
    CRX_E_UPSAMPLING_REQUESTED = 14,
    CRX_E_INVALID_RATE = 15,

    /* signal analysis */
    CRX_E_TOO_SHORT = 20,
    CRX_E_LENGTH_MISMATCH = 21,
    CRX_E_TOO_FEW_PEAKS = 22,
    CRX_E_NO_PEAKS_FOUND = 23,
    CRX_E_INSUFFICIENT_VALID_SAMPLES = 24,

    /* feature assembly */
    CRX_E_UNKNOWN_PATIENT = 30,
    CRX_E_DUPLICATE_PATIENT = 31,
    CRX_E_ALL_MISSING_FEATURE = 32,
    CRX_E_SCHEMA_MISMATCH = 33,
    CRX_E_EMPTY_INPUT = 34,

    /* classifiers */
    CRX_E_SINGLE_CLASS = 40,
    CRX_E_EMPTY_AFTER_RULE = 41,
    CRX_E_REGISTRY_MISMATCH = 42,
    CRX_E_MISSING_CLINICAL = 43,
    CRX_E_EMPTY_GRID = 44,

    /* model files */
    CRX_E_VERSION_MISMATCH = 50,
    CRX_E_CORRUPT_MODEL = 51,

    CRX_E_INTERNAL = 99
} crx_status;

CRX_API const char* crx_version(void);
CRX_API const char* crx_status_name(crx_status s);

/* Message for the last failing call on this thread ("" if none). */
CRX_API const char* crx_last_error(void);

/* ------------------------------------------------------------------ */
/* Run configuration: defaults, then optional file load, then key=value
 * overrides. Keys are documented in README.md.                        */
/* ------------------------------------------------------------------ */

typedef struct crx_config crx_config;

CRX_API crx_config* crx_config_new(void);
CRX_API void crx_config_free(crx_config* cfg);
CRX_API crx_status crx_config_load_file(crx_config* cfg, const char* path);
CRX_API crx_status crx_config_set(crx_config* cfg, const char* key, const char* value);

/* ------------------------------------------------------------------ */
/* Pipeline commands (one per CLI subcommand).                         */
/* ------------------------------------------------------------------ */

/* Write a seeded synthetic cohort (per-patient signal CSVs, epoch sidecar,
 * clinical CSV, manifest) into out_dir. */
CRX_API crx_status crx_synth(const crx_config* cfg, unsigned n_patients,
                             double failure_rate, double separability,
                             unsigned long long seed, const char* out_dir);

/* Extract the 79-feature matrix from a directory of signal CSVs.
 * Per-patient failures are logged and skipped; the call fails only if no
 * patient could be processed. Row counts are optional outputs. */
CRX_API crx_status crx_extract(const crx_config* cfg, const char* signals_dir,
                               const char* epochs_csv, const char* clinical_csv,
                               const char* out_features_csv,
                               unsigned* out_rows_written, unsigned* out_rows_failed);

/* Cross-validated grid search + final fit. model_kind is "rf", "brf" or
 * "cdbrf"; grid_path may be NULL for the built-in default grid. Summary
 * metrics (sensitivity, specificity, balanced accuracy, AUC of the pooled
 * cross-fold ROC) are written to out_summary4 when non-NULL. */
CRX_API crx_status crx_train(const crx_config* cfg, const char* features_csv,
                             const char* model_kind, const char* grid_path,
                             const char* out_model_path, const char* out_report_path,
                             double* out_summary4);

/* Evaluate a stored model against labeled features; writes a report JSON
 * and a ROC CSV next to it. */
CRX_API crx_status crx_evaluate(const crx_config* cfg, const char* features_csv,
                                const char* model_path, const char* out_report_path,
                                double* out_summary4);

/* Per-patient success probabilities and thresholded labels. */
CRX_API crx_status crx_predict(const crx_config* cfg, const char* features_csv,
                               const char* model_path, const char* out_csv);

/* ------------------------------------------------------------------ */
/* Trained model handle.                                               */
/* ------------------------------------------------------------------ */

typedef struct crx_model crx_model;

CRX_API crx_status crx_model_open(const char* path, crx_model** out);
CRX_API void crx_model_close(crx_model* model);
CRX_API const char* crx_model_kind(const crx_model* model);
CRX_API int crx_model_feature_count(const crx_model* model);
CRX_API const char* crx_model_feature_name(const crx_model* model, int index);

/* features must hold one value per registry entry, in registry order;
 * NaN marks a missing value (filled from the model's imputation table). */
CRX_API crx_status crx_model_predict(const crx_model* model, const double* features,
                                     size_t n_features, double* out_prob_success);

#ifdef __cplusplus
}
#endif

#endif /* CRX_H */
