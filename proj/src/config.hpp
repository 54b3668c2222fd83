#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace crx {

// Sliding-window lengths for the metric engines, in seconds.
struct WindowConfig {
    double short_s = 2.0;
    double long_s = 30.0;
    double power_s = 6.0;
    double stft_s = 8.0;
    double corr_s = 30.0;
};

// Thresholds for the respiratory-state segmentation.
struct PatternThresholds {
    double theta_mvt = 2.0;
    double theta_pau = 0.25;
    double theta_phase_deg = 90.0;
    double smooth_s = 1.0;  // 0 disables label smoothing
};

// Everything a run needs beyond its input files. Parsed from key=value
// text with '#' comments, then overridden by CLI flags; serialized into
// every JSON artifact for provenance.
struct RunConfig {
    double analysis_rate_hz = 50.0;  // RIP/PPG/SAT processing timebase
    double ecg_rate_hz = 200.0;      // QRS detection timebase

    WindowConfig windows;
    PatternThresholds patterns;
    bool patterns_full_ettcpap = false;  // include ETT-CPAP minute 1 in pattern stats
    std::string rho_cf_source = "ecg";   // cardiac-frequency input for rho: "ecg"|"ppg"
    std::string hrv_epoch = "ettcpap";   // "ettcpap" (canonical) or "imv"

    double rule_ga_min_weeks = 27.0;
    double rule_bw_min_g = 1000.0;

    int folds = 5;
    uint64_t seed = 12345;
    unsigned threads = 0;  // 0 = hardware concurrency

    bool rf_bootstrap = true;                 // false: per-tree subset without replacement
    bool undersample_with_replacement = true;

    bool dump_metrics = false;
    bool dump_peaks = false;
    bool dump_patterns = false;

    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
    nlohmann::ordered_json to_json() const;
};

}  // namespace crx
