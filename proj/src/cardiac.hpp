#pragma once

#include <span>
#include <vector>

#include "metrics.hpp"

namespace crx {

// R-peak times in seconds from the start of the analyzed segment, strictly
// increasing. Intervals outside [0.2 s, 3 s] are dropped before any
// statistic is computed.
struct RPeakTrain {
    std::vector<double> peak_times_s;

    // RR intervals (seconds) after range cleaning.
    std::vector<double> clean_intervals() const;
};

struct HrvFeatures {
    double sdnn_ms = 0.0;
    double sdsd_ms = 0.0;
    double triangular_index = 0.0;
};

// QRS detection on a 200 Hz ECG: band-pass ~5-15 Hz, derivative, squaring,
// 150 ms moving-window integration, adaptive dual thresholds with
// search-back and a 200 ms refractory period. Peak times come from local
// maxima of the band-passed signal, corrected for the filter delay.
RPeakTrain detect_r_peaks(std::span<const double> ecg, double rate_hz);

// SDNN (population std of RR), SDSD (root mean square of successive RR
// differences) and the triangular index (interval count over the modal
// count of a 7.8125 ms histogram anchored at 0). Needs >= 3 peaks.
HrvFeatures hrv_features(const RPeakTrain& peaks);

// Instantaneous heart rate 60/RR held piecewise between peaks and sampled
// onto the analysis timebase across [t0, t0 + out_len/rate).
MetricSeries heart_rate_track(const RPeakTrain& peaks, double out_rate_hz,
                              double t0_s, size_t out_len);

}  // namespace crx
