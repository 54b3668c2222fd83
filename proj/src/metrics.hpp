#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "config.hpp"

namespace crx {

// The ten sample-by-sample cardiorespiratory variability metrics, all
// emitted on the shared 50 Hz analysis timebase. Band limiting is done by
// spectral masking of the whole epoch (exactly band-limited, deterministic);
// the sliding windows themselves are trailing, so every engine is causal up
// to that masking.
enum class MetricKind : int {
    RpRc = 0,   // pause power, ribcage
    RpAb = 1,   // pause power, abdomen
    RfAb = 2,   // respiratory frequency (filter bank argmax)
    CfEc = 3,   // cardiac frequency from ECG
    CfPp = 4,   // cardiac frequency from PPG
    RmsSum = 5, // RMS(rcg) + RMS(abd)
    Phi = 6,    // |thoraco-abdominal phase| in degrees
    BmpRc = 7,  // movement/breathing band power ratio, ribcage
    BmpAb = 8,  // movement/breathing band power ratio, abdomen
    RhoRfCf = 9 // windowed correlation of rf and cf
};
constexpr int kNumMetrics = 10;
const char* metric_name(MetricKind kind);

struct MetricSeries {
    MetricKind kind{};
    double rate_hz = 0.0;
    std::vector<double> values;
    std::vector<uint8_t> valid;  // 0 where the window is incomplete

    size_t size() const { return values.size(); }
};

// Band definitions shared by the engines (Hz).
constexpr double kPauseBandLo = 0.0, kPauseBandHi = 2.0;        // DC excluded
constexpr double kMovementBandLo = 0.0, kMovementBandHi = 0.4;  // DC excluded
constexpr double kBreathBandLo = 0.4, kBreathBandHi = 2.0;
constexpr double kCardiacBandLo = 1.5, kCardiacBandHi = 3.5;
constexpr double kRfBankStep = 0.2;  // 10 bands covering (0, 2] Hz
constexpr double kBmpEpsilon = 1e-12;

// Power of the 0-2 Hz band over a trailing short window, relative to the
// median short-window power over the preceding long window.
MetricSeries pause_power(std::span<const double> band_signal, double rate_hz,
                         MetricKind kind, const WindowConfig& cfg);

// Center frequency (0.1, 0.3, ..., 1.9 Hz) of the 0.2 Hz-wide band with the
// largest trailing-short-window power.
MetricSeries respiratory_frequency(std::span<const double> abd, double rate_hz,
                                   const WindowConfig& cfg);

// STFT argmax within 1.5-3.5 Hz, held onto the 50 Hz output grid. The input
// may be at a different rate (ECG at 200 Hz); out_len fixes the output length.
MetricSeries cardiac_frequency(std::span<const double> signal, double signal_rate_hz,
                               MetricKind kind, const WindowConfig& cfg,
                               double out_rate_hz, size_t out_len);

MetricSeries rms_sum(std::span<const double> rcg, std::span<const double> abd,
                     double rate_hz, const WindowConfig& cfg);

// Absolute wrapped phase difference of the band-limited analytic signals,
// in degrees within [0, 180].
MetricSeries thoraco_abdominal_phase(std::span<const double> rcg,
                                     std::span<const double> abd, double rate_hz,
                                     const WindowConfig& cfg);

// Movement-band power over breathing-band power in a trailing short window.
MetricSeries movement_power(std::span<const double> band_signal, double rate_hz,
                            MetricKind kind, const WindowConfig& cfg);

// Zero-lag Pearson correlation of two metric tracks over a trailing window;
// 0 when either window is (numerically) constant.
MetricSeries rf_cf_correlation(const MetricSeries& rf, const MetricSeries& cf,
                               const WindowConfig& cfg);

}  // namespace crx
