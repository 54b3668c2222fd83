#include "cardiac.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "stats.hpp"

namespace crx {

namespace {

constexpr double kDesignRateHz = 200.0;
constexpr double kRefractoryS = 0.200;
constexpr double kTwaveWindowS = 0.360;
constexpr double kIntegrationS = 0.150;
constexpr double kMinIntervalS = 0.2;
constexpr double kMaxIntervalS = 3.0;
constexpr double kTriangularBinMs = 7.8125;  // 1/128 s

// Recursive low-pass, cutoff ~11 Hz at 200 Hz; gain 36, delay 5 samples.
std::vector<double> pt_lowpass(std::span<const double> x) {
    const size_t n = x.size();
    std::vector<double> y(n, 0.0);
    auto xa = [&](long i) { return i >= 0 ? x[static_cast<size_t>(i)] : 0.0; };
    auto ya = [&](long i) { return i >= 0 ? y[static_cast<size_t>(i)] : 0.0; };
    for (long i = 0; i < static_cast<long>(n); ++i) {
        y[static_cast<size_t>(i)] = 2.0 * ya(i - 1) - ya(i - 2) + xa(i) -
                                    2.0 * xa(i - 6) + xa(i - 12);
    }
    for (double& v : y) v /= 36.0;
    return y;
}

// Recursive high-pass, cutoff ~5 Hz at 200 Hz; unit gain, delay 16 samples.
std::vector<double> pt_highpass(std::span<const double> x) {
    const size_t n = x.size();
    std::vector<double> y(n, 0.0);
    auto xa = [&](long i) { return i >= 0 ? x[static_cast<size_t>(i)] : 0.0; };
    auto ya = [&](long i) { return i >= 0 ? y[static_cast<size_t>(i)] : 0.0; };
    for (long i = 0; i < static_cast<long>(n); ++i) {
        y[static_cast<size_t>(i)] = ya(i - 1) - xa(i) / 32.0 + xa(i - 16) -
                                    xa(i - 17) + xa(i - 32) / 32.0;
    }
    return y;
}

std::vector<double> pt_derivative(std::span<const double> x) {
    const size_t n = x.size();
    std::vector<double> y(n, 0.0);
    auto xa = [&](long i) { return i >= 0 ? x[static_cast<size_t>(i)] : 0.0; };
    for (long i = 0; i < static_cast<long>(n); ++i) {
        y[static_cast<size_t>(i)] =
            (2.0 * xa(i) + xa(i - 1) - xa(i - 3) - 2.0 * xa(i - 4)) / 8.0;
    }
    return y;
}

}  // namespace

RPeakTrain detect_r_peaks(std::span<const double> ecg, double rate_hz) {
    require(std::abs(rate_hz - kDesignRateHz) <= 0.01 * kDesignRateHz, CRX_E_INVALID_RATE,
            "detect_r_peaks: detector runs on the 200 Hz ECG timebase");
    const size_t n = ecg.size();
    require(n >= static_cast<size_t>(10.0 * rate_hz), CRX_E_TOO_SHORT,
            "detect_r_peaks: need at least 10 s of ECG");

    auto bp = pt_highpass(pt_lowpass(ecg));
    auto der = pt_derivative(bp);
    // trailing_mean_square squares internally, so this is the classic
    // square-then-integrate stage in one step.
    const auto mwi_n = static_cast<size_t>(std::llround(kIntegrationS * rate_hz));
    auto mwi_raw = trailing_mean_square(der, mwi_n);
    std::vector<double> mwi(n, 0.0);
    for (size_t i = mwi_n - 1; i < n; ++i) mwi[i] = mwi_raw[i];

    // Local maxima of the integrated signal are the detection candidates.
    std::vector<size_t> candidates;
    for (size_t i = 1; i + 1 < n; ++i)
        if (mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1]) candidates.push_back(i);

    // Threshold training on the first two seconds.
    const auto train_n = static_cast<size_t>(2.0 * rate_hz);
    double train_max = 0.0, train_mean = 0.0;
    for (size_t i = 0; i < train_n; ++i) {
        train_max = std::max(train_max, mwi[i]);
        train_mean += mwi[i];
    }
    train_mean /= static_cast<double>(train_n);
    double spki = 0.5 * train_max;
    double npki = 0.5 * train_mean;

    const auto refractory = static_cast<size_t>(kRefractoryS * rate_hz);
    const auto twave_n = static_cast<size_t>(kTwaveWindowS * rate_hz);
    const auto slope_half = static_cast<size_t>(0.075 * rate_hz);
    auto max_slope_near = [&](size_t i) {
        const size_t a = i > slope_half ? i - slope_half : 0;
        const size_t b = std::min(n - 1, i + slope_half);
        double m = 0.0;
        for (size_t k = a; k <= b; ++k) m = std::max(m, std::abs(der[k]));
        return m;
    };

    std::vector<size_t> qrs_mwi;   // accepted fiducials on the mwi grid
    std::vector<double> recent_rr;
    auto rr_average = [&]() {
        if (recent_rr.empty()) return 0.0;
        const size_t take = std::min<size_t>(recent_rr.size(), 8);
        double s = 0.0;
        for (size_t k = recent_rr.size() - take; k < recent_rr.size(); ++k)
            s += recent_rr[k];
        return s / static_cast<double>(take);
    };
    auto accept = [&](size_t i, bool from_searchback) {
        if (!qrs_mwi.empty()) {
            recent_rr.push_back(static_cast<double>(i - qrs_mwi.back()) / rate_hz);
        }
        qrs_mwi.push_back(i);
        if (from_searchback)
            spki = 0.25 * mwi[i] + 0.75 * spki;
        else
            spki = 0.125 * mwi[i] + 0.875 * spki;
    };

    size_t cand_pos = 0;
    for (; cand_pos < candidates.size(); ++cand_pos) {
        const size_t i = candidates[cand_pos];
        const double v = mwi[i];
        const double thr1 = npki + 0.25 * (spki - npki);

        if (!qrs_mwi.empty() && i - qrs_mwi.back() < refractory) continue;

        bool is_qrs = v > thr1;
        if (is_qrs && !qrs_mwi.empty() && i - qrs_mwi.back() < twave_n) {
            // T waves rise much more slowly than the preceding QRS
            if (max_slope_near(i) < 0.5 * max_slope_near(qrs_mwi.back())) is_qrs = false;
        }

        if (is_qrs) {
            accept(i, false);
        } else {
            npki = 0.125 * v + 0.875 * npki;
        }

        // Search-back when an expected beat is overdue.
        const double rr_avg = rr_average();
        if (!qrs_mwi.empty() && rr_avg > 0.0 &&
            static_cast<double>(i - qrs_mwi.back()) / rate_hz > 1.66 * rr_avg) {
            const double thr2 = 0.5 * (npki + 0.25 * (spki - npki));
            size_t best = 0;
            double best_v = -1.0;
            for (size_t k = 0; k < cand_pos; ++k) {
                const size_t j = candidates[k];
                if (j <= qrs_mwi.back() + refractory || j >= i) continue;
                if (mwi[j] > thr2 && mwi[j] > best_v) {
                    best_v = mwi[j];
                    best = j;
                }
            }
            if (best_v > 0.0) {
                // keep fiducials ordered
                const size_t last = qrs_mwi.back();
                if (best > last) accept(best, true);
            }
        }
    }

    require(qrs_mwi.size() >= 2, CRX_E_NO_PEAKS_FOUND,
            "detect_r_peaks: fewer than 2 peaks detected");

    // Locate each R wave as the band-passed local maximum just before the
    // integrated-signal fiducial, then undo the band-pass group delay
    // (5 + 16 samples).
    const auto bp_delay = static_cast<long>(21);
    const auto back = static_cast<size_t>(0.250 * rate_hz);
    RPeakTrain train;
    long prev_idx = -1;
    for (size_t f = 0; f < qrs_mwi.size(); ++f) {
        const size_t i = qrs_mwi[f];
        size_t a = i > back ? i - back : 0;
        if (prev_idx >= 0) a = std::max(a, static_cast<size_t>(prev_idx) + 1);
        size_t best = a;
        for (size_t k = a; k <= i; ++k)
            if (bp[k] > bp[best]) best = k;
        const long r_idx = static_cast<long>(best) - bp_delay;
        if (r_idx <= prev_idx) continue;
        prev_idx = static_cast<long>(best);
        train.peak_times_s.push_back(static_cast<double>(r_idx) / rate_hz);
    }
    require(train.peak_times_s.size() >= 2, CRX_E_NO_PEAKS_FOUND,
            "detect_r_peaks: fewer than 2 peaks located");
    return train;
}

std::vector<double> RPeakTrain::clean_intervals() const {
    std::vector<double> rr;
    for (size_t i = 1; i < peak_times_s.size(); ++i) {
        const double d = peak_times_s[i] - peak_times_s[i - 1];
        if (d >= kMinIntervalS && d <= kMaxIntervalS) rr.push_back(d);
    }
    return rr;
}

HrvFeatures hrv_features(const RPeakTrain& peaks) {
    require(peaks.peak_times_s.size() >= 3, CRX_E_TOO_FEW_PEAKS,
            "hrv_features: need at least 3 peaks");
    auto rr = peaks.clean_intervals();
    require(rr.size() >= 2, CRX_E_TOO_FEW_PEAKS,
            "hrv_features: fewer than 2 intervals after cleaning");

    HrvFeatures out;
    out.sdnn_ms = std_population(rr) * 1000.0;

    double ssd = 0.0;
    for (size_t i = 1; i < rr.size(); ++i) {
        const double d = rr[i] - rr[i - 1];
        ssd += d * d;
    }
    out.sdsd_ms = std::sqrt(ssd / static_cast<double>(rr.size() - 1)) * 1000.0;

    std::vector<long> bins;
    bins.reserve(rr.size());
    for (double d : rr)
        bins.push_back(static_cast<long>(std::floor(d * 1000.0 / kTriangularBinMs)));
    std::sort(bins.begin(), bins.end());
    long best_count = 0, run = 0;
    for (size_t i = 0; i < bins.size(); ++i) {
        run = (i > 0 && bins[i] == bins[i - 1]) ? run + 1 : 1;
        best_count = std::max(best_count, run);
    }
    out.triangular_index = static_cast<double>(rr.size()) / static_cast<double>(best_count);
    return out;
}

MetricSeries heart_rate_track(const RPeakTrain& peaks, double out_rate_hz, double t0_s,
                              size_t out_len) {
    const auto& p = peaks.peak_times_s;
    require(p.size() >= 2, CRX_E_TOO_FEW_PEAKS, "heart_rate_track: need >= 2 peaks");

    struct Segment {
        double start, end, bpm;
    };
    std::vector<Segment> segs;
    for (size_t i = 1; i < p.size(); ++i) {
        const double rr = p[i] - p[i - 1];
        if (rr >= kMinIntervalS && rr <= kMaxIntervalS)
            segs.push_back({p[i - 1], p[i], 60.0 / rr});
    }
    require(!segs.empty(), CRX_E_TOO_FEW_PEAKS,
            "heart_rate_track: no valid RR interval");

    MetricSeries out;
    out.kind = MetricKind::CfEc;  // carrier only; stored in bpm
    out.rate_hz = out_rate_hz;
    out.values.assign(out_len, 0.0);
    out.valid.assign(out_len, 1);

    size_t s = 0;
    double current = segs[0].bpm;
    for (size_t j = 0; j < out_len; ++j) {
        const double t = t0_s + static_cast<double>(j) / out_rate_hz;
        while (s < segs.size() && segs[s].end <= t) {
            current = segs[s].bpm;
            ++s;
        }
        if (s < segs.size() && t >= segs[s].start) current = segs[s].bpm;
        out.values[j] = current;
    }
    return out;
}

}  // namespace crx
