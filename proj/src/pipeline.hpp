#pragma once

#include <array>
#include <string>

#include "config.hpp"
#include "eval.hpp"
#include "synth.hpp"

namespace crx {

// File-level pipeline entry points backing the C API and the CLI. All of
// them are deterministic given their arguments and the config's seed.

void run_synth(const RunConfig& cfg, const SynthParams& params,
               const std::string& out_dir);

struct ExtractStats {
    unsigned written = 0;
    unsigned failed = 0;
};

// Per-patient failures are logged to stderr and skipped; throws only when
// nothing could be extracted at all.
ExtractStats run_extract(const RunConfig& cfg, const std::string& signals_dir,
                         const std::string& epochs_csv, const std::string& clinical_csv,
                         const std::string& out_features_csv);

// Returns {sensitivity, specificity, balanced accuracy, auc} of the pooled
// cross-fold predictions. grid_path may be empty for the built-in grid.
std::array<double, 4> run_train(const RunConfig& cfg, const std::string& features_csv,
                                const std::string& kind_name, const std::string& grid_path,
                                const std::string& out_model, const std::string& out_report);

std::array<double, 4> run_evaluate(const RunConfig& cfg, const std::string& features_csv,
                                   const std::string& model_path,
                                   const std::string& out_report);

void run_predict(const RunConfig& cfg, const std::string& features_csv,
                 const std::string& model_path, const std::string& out_csv);

// Default hyperparameter grid used when no grid file is given.
std::vector<Hyperparameters> default_grid(const RunConfig& cfg);

// Grid file: JSON array of {n_trees, max_features, max_depth, min_leaf}.
std::vector<Hyperparameters> load_grid(const std::string& path, const RunConfig& cfg);

}  // namespace crx
