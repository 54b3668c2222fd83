#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "config.hpp"
#include "metrics.hpp"
#include "signals.hpp"

#include <json.hpp>

namespace crx {

// ---------------------------------------------------------------------
// Canonical 79-feature registry: 40 metric scalars (10 metrics x
// {median, IQR, moving-power median, moving-power IQR} on ETT-CPAP
// minute 2), 4 SAT scalars, 3 HRV scalars, 30 pattern scalars
// (6 patterns x {count, total, max, density, frequency}) and 2 clinical
// values. Order is fixed and embedded in every model file.
// ---------------------------------------------------------------------

constexpr int kNumFeatures = 79;
constexpr int kBwFeatureIndex = 77;
constexpr int kGaFeatureIndex = 78;

const std::array<std::string, kNumFeatures>& feature_names();
uint64_t feature_registry_hash();
std::string feature_registry_hash_hex();

struct FeatureMatrix {
    std::vector<std::string> patient_ids;
    std::vector<Outcome> outcomes;
    std::vector<double> values;    // rows x kNumFeatures, NaN where missing
    std::vector<uint8_t> missing;  // rows x kNumFeatures

    size_t rows() const { return patient_ids.size(); }
    double value(size_t r, int c) const { return values[r * kNumFeatures + c]; }
    bool is_missing(size_t r, int c) const { return missing[r * kNumFeatures + c] != 0; }
    void set(size_t r, int c, double v);
    void set_missing(size_t r, int c);
    void add_row(const std::string& id, Outcome outcome);
    std::span<const double> row(size_t r) const {
        return {values.data() + r * kNumFeatures, kNumFeatures};
    }
};

// ---------------------------------------------------------------------
// Scalarization
// ---------------------------------------------------------------------

struct ScalarFeatures {
    std::array<double, 4> v{};       // median, iqr, power median, power iqr
    std::array<bool, 4> present{};
};

// Median/IQR of the valid samples plus median/IQR of the trailing
// moving-average power (window variance over power_s seconds). All four
// are absent when fewer than half the samples are valid.
ScalarFeatures scalarize_metric(const MetricSeries& minute2, double power_s);

// kurtosis (excess), skewness (both population), then moving-power
// median/IQR, computed on the raw SAT slice.
ScalarFeatures sat_features(std::span<const double> sat_minute2, double rate_hz,
                            double power_s);

// ---------------------------------------------------------------------
// Per-patient extraction and cohort assembly
// ---------------------------------------------------------------------

struct DumpOptions {
    std::string dir;
    bool metrics = false;
    bool peaks = false;
    bool patterns = false;
};

struct PatientFeatures {
    std::array<double, kNumFeatures> values{};
    std::array<uint8_t, kNumFeatures> missing{};
};

// Full signal pipeline for one recording (resample, metrics, R peaks,
// patterns, scalarize). Clinical values are left missing; assemble()
// fills them in.
PatientFeatures extract_patient_features(const Recording& rec, const RunConfig& cfg,
                                         const DumpOptions* dumps = nullptr);

// One row per patient, in sorted patient order. Recordings and clinical
// records must carry exactly the same patient ids.
FeatureMatrix assemble(const std::vector<Recording>& recordings,
                       const std::vector<ClinicalRecord>& clinical,
                       const RunConfig& cfg);

FeatureMatrix subset_rows(const FeatureMatrix& m, std::span<const size_t> rows);

// ---------------------------------------------------------------------
// Median imputation
// ---------------------------------------------------------------------

struct ImputationTable {
    std::array<double, kNumFeatures> success{}, failure{}, overall{};
    std::array<uint8_t, kNumFeatures> has_success{}, has_failure{}, has_overall{};

    nlohmann::ordered_json to_json() const;
    static ImputationTable from_json(const nlohmann::json& j);
};

// Group-wise medians over the fit rows only. Throws when a feature has no
// observed value at all among them.
ImputationTable impute_fit(const FeatureMatrix& m, std::span<const size_t> fit_rows);

// Fills every missing cell: rows listed in fit_rows with a known outcome
// take their outcome group's median, everything else (prediction-time
// rows) takes the overall median.
void impute_apply(FeatureMatrix& m, const ImputationTable& table,
                  std::span<const size_t> fit_rows);

// ---------------------------------------------------------------------
// Feature CSV: header patient_id,outcome,<79 names>; missing cells empty.
// ---------------------------------------------------------------------

void write_feature_csv(const std::string& path, const FeatureMatrix& m);
FeatureMatrix read_feature_csv(const std::string& path);

}  // namespace crx
