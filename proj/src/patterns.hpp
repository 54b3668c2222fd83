#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "config.hpp"
#include "metrics.hpp"

namespace crx {

// Mutually exclusive respiratory states, one label per 50 Hz sample.
enum class RespLabel : uint8_t { Pau = 0, Mvt = 1, Syb = 2, Asb = 3 };
constexpr int kNumRespLabels = 4;

// The six scored patterns, in registry order.
enum class PatternKind : int { Pau = 0, Mvt = 1, Syb = 2, Asb = 3, Bdy = 4, Dst = 5 };
constexpr int kNumPatterns = 6;
const char* pattern_name(PatternKind p);

// Threshold rule over the metric tracks, highest priority first:
// movement, then pause, then asynchrony, else synchronous breathing.
// A centered 1 s median filter (on the integer label codes) removes
// single-sample flicker; thresholds.smooth_s == 0 disables it.
std::vector<RespLabel> segment_respiration(const MetricSeries& rp_rc,
                                           const MetricSeries& rp_ab,
                                           const MetricSeries& bmp_rc,
                                           const MetricSeries& bmp_ab,
                                           const MetricSeries& phi,
                                           const PatternThresholds& thresholds);

// hr < 100 bpm outside movement-artifact samples.
std::vector<uint8_t> detect_bradycardia(const MetricSeries& hr_bpm,
                                        std::span<const uint8_t> artifact_mask);

// sat < 85 % outside PPG-artifact samples.
std::vector<uint8_t> detect_desaturation(std::span<const double> sat,
                                         std::span<const uint8_t> ppg_artifact_mask);

// PPG movement-artifact mask: movement/breathing band-power ratio on the
// PPG exceeding theta_mvt.
std::vector<uint8_t> ppg_artifact_mask(std::span<const double> ppg, double rate_hz,
                                       const WindowConfig& windows, double theta_mvt);

struct PatternStats {
    double count = 0.0;      // occurrences (maximal runs)
    double total_s = 0.0;    // summed duration
    double max_s = 0.0;      // longest run
    double density = 0.0;    // total_s / T_total
    double freq_per_s = 0.0; // count / T_total
};

// Run statistics for all six patterns over a labeled span of duration
// total_s seconds.
std::array<PatternStats, kNumPatterns> pattern_stats(std::span<const RespLabel> labels,
                                                     std::span<const uint8_t> bdy,
                                                     std::span<const uint8_t> dst,
                                                     double rate_hz, double total_s);

}  // namespace crx
