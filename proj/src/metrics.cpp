#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "errors.hpp"
#include "fft.hpp"
#include "stats.hpp"

namespace crx {

namespace {

using std::numbers::pi;

size_t window_samples(double seconds, double rate_hz) {
    return std::max<size_t>(1, static_cast<size_t>(std::llround(seconds * rate_hz)));
}

MetricSeries make_series(MetricKind kind, double rate_hz, size_t n) {
    MetricSeries s;
    s.kind = kind;
    s.rate_hz = rate_hz;
    s.values.assign(n, 0.0);
    s.valid.assign(n, 0);
    return s;
}

}  // namespace

const char* metric_name(MetricKind kind) {
    switch (kind) {
        case MetricKind::RpRc: return "rp_rc";
        case MetricKind::RpAb: return "rp_ab";
        case MetricKind::RfAb: return "rf_ab";
        case MetricKind::CfEc: return "cf_ec";
        case MetricKind::CfPp: return "cf_pp";
        case MetricKind::RmsSum: return "rms_sum";
        case MetricKind::Phi: return "phi";
        case MetricKind::BmpRc: return "bmp_rc";
        case MetricKind::BmpAb: return "bmp_ab";
        case MetricKind::RhoRfCf: return "rho_rfcf";
    }
    return "?";
}

MetricSeries pause_power(std::span<const double> x, double rate_hz, MetricKind kind,
                         const WindowConfig& cfg) {
    require(kind == MetricKind::RpRc || kind == MetricKind::RpAb, CRX_E_INVALID_ARG,
            "pause_power: kind must be rp_rc or rp_ab");
    const size_t n = x.size();
    const size_t short_n = window_samples(cfg.short_s, rate_hz);
    const size_t long_n = window_samples(cfg.long_s, rate_hz);
    require(n >= short_n + long_n, CRX_E_TOO_SHORT,
            "pause_power: signal shorter than long + short window");

    // Breathing-band component over the whole epoch (DC excluded), then the
    // trailing short-window power and its lagged long-window median.
    auto band = fft::bandpass(x, rate_hz, kPauseBandLo, kPauseBandHi, false, true);
    auto p_short = trailing_mean_square(band, short_n);

    // sliding_median cannot digest the NaN warmup prefix, so feed it the
    // defined part only.
    std::vector<double> defined(p_short.begin() + static_cast<long>(short_n - 1),
                                p_short.end());
    auto med = sliding_median(defined, long_n);

    MetricSeries out = make_series(kind, rate_hz, n);
    // The long window holds short-window powers ending in (i-short-long,
    // i-short]; the first index where both windows are complete is
    // 2*short + long - 2.
    for (size_t i = 2 * short_n + long_n - 2; i < n; ++i) {
        const size_t med_idx = i - 2 * short_n + 1;
        const double denom = med[med_idx];
        out.values[i] = p_short[i] / (denom + kBmpEpsilon);
        out.valid[i] = 1;
    }
    return out;
}

MetricSeries respiratory_frequency(std::span<const double> abd, double rate_hz,
                                   const WindowConfig& cfg) {
    const size_t n = abd.size();
    const size_t short_n = window_samples(cfg.short_s, rate_hz);
    require(n >= short_n, CRX_E_TOO_SHORT, "respiratory_frequency: signal too short");

    constexpr int kBands = 10;
    std::vector<std::vector<double>> band_power(kBands);
    for (int b = 0; b < kBands; ++b) {
        const double lo = kRfBankStep * b;
        const double hi = lo + kRfBankStep;
        // Half-open bands [lo, hi) partition the bins; the top band keeps
        // its upper edge and the bottom band drops DC.
        auto comp = fft::bandpass(abd, rate_hz, lo, hi, b != 0, b == kBands - 1);
        band_power[b] = trailing_mean_square(comp, short_n);
    }

    MetricSeries out = make_series(MetricKind::RfAb, rate_hz, n);
    for (size_t i = short_n - 1; i < n; ++i) {
        int best = 0;
        double best_p = band_power[0][i];
        for (int b = 1; b < kBands; ++b) {
            if (band_power[b][i] > best_p) {
                best_p = band_power[b][i];
                best = b;
            }
        }
        // (2b+1)/10 rounds to the exact double literals 0.1, 0.3, ..., 1.9
        out.values[i] = static_cast<double>(2 * best + 1) / 10.0;
        out.valid[i] = 1;
    }
    return out;
}

MetricSeries cardiac_frequency(std::span<const double> signal, double signal_rate_hz,
                               MetricKind kind, const WindowConfig& cfg,
                               double out_rate_hz, size_t out_len) {
    require(kind == MetricKind::CfEc || kind == MetricKind::CfPp, CRX_E_INVALID_ARG,
            "cardiac_frequency: kind must be cf_ec or cf_pp");
    const size_t n = signal.size();
    const size_t win_n = window_samples(cfg.stft_s, signal_rate_hz);
    require(n >= win_n, CRX_E_TOO_SHORT, "cardiac_frequency: signal too short");

    size_t nfft = 1;
    while (nfft < win_n) nfft <<= 1;
    nfft <<= 1;  // pad once more: ~0.1 Hz bins for an 8 s window
    const double df = signal_rate_hz / static_cast<double>(nfft);
    const auto k_lo = static_cast<size_t>(std::ceil(kCardiacBandLo / df - 1e-9));
    const auto k_hi = std::min(nfft / 2, static_cast<size_t>(
                                             std::floor(kCardiacBandHi / df + 1e-9)));

    // Hann-tapered windows on a half-second hop, argmax within the band.
    const size_t hop = std::max<size_t>(1, static_cast<size_t>(std::llround(0.5 * signal_rate_hz)));
    std::vector<double> taper(win_n);
    for (size_t i = 0; i < win_n; ++i)
        taper[i] = 0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(i) /
                                        static_cast<double>(win_n - 1));

    std::vector<double> hop_end_s, hop_freq;
    std::vector<double> buf(nfft, 0.0);
    for (size_t end = win_n; end <= n; end += hop) {
        const size_t start = end - win_n;
        for (size_t i = 0; i < win_n; ++i) buf[i] = signal[start + i] * taper[i];
        std::fill(buf.begin() + static_cast<long>(win_n), buf.end(), 0.0);
        auto spec = fft::rfft(buf);
        size_t best_k = k_lo;
        double best_mag = -1.0;
        for (size_t k = k_lo; k <= k_hi; ++k) {
            const double mag = std::norm(spec[k]);
            if (mag > best_mag) {
                best_mag = mag;
                best_k = k;
            }
        }
        hop_end_s.push_back(static_cast<double>(end) / signal_rate_hz);
        hop_freq.push_back(df * static_cast<double>(best_k));
    }

    // Hold the latest completed window onto the output grid (causal).
    MetricSeries out = make_series(kind, out_rate_hz, out_len);
    size_t h = 0;
    for (size_t j = 0; j < out_len; ++j) {
        const double t = static_cast<double>(j + 1) / out_rate_hz;
        while (h + 1 < hop_end_s.size() && hop_end_s[h + 1] <= t + 1e-9) ++h;
        if (!hop_end_s.empty() && hop_end_s[h] <= t + 1e-9) {
            out.values[j] = hop_freq[h];
            out.valid[j] = 1;
        }
    }
    return out;
}

MetricSeries rms_sum(std::span<const double> rcg, std::span<const double> abd,
                     double rate_hz, const WindowConfig& cfg) {
    require(rcg.size() == abd.size(), CRX_E_LENGTH_MISMATCH,
            "rms_sum: channel lengths differ");
    const size_t n = rcg.size();
    const size_t short_n = window_samples(cfg.short_s, rate_hz);
    require(n >= short_n, CRX_E_TOO_SHORT, "rms_sum: signal too short");

    auto rms_rc = trailing_rms(rcg, short_n);
    auto rms_ab = trailing_rms(abd, short_n);
    MetricSeries out = make_series(MetricKind::RmsSum, rate_hz, n);
    for (size_t i = short_n - 1; i < n; ++i) {
        out.values[i] = rms_rc[i] + rms_ab[i];
        out.valid[i] = 1;
    }
    return out;
}

MetricSeries thoraco_abdominal_phase(std::span<const double> rcg,
                                     std::span<const double> abd, double rate_hz,
                                     const WindowConfig& cfg) {
    require(rcg.size() == abd.size(), CRX_E_LENGTH_MISMATCH,
            "phase: channel lengths differ");
    const size_t n = rcg.size();
    require(n >= window_samples(cfg.long_s, rate_hz), CRX_E_TOO_SHORT,
            "phase: signal too short");

    auto z_rc = fft::analytic_band(rcg, rate_hz, kBreathBandLo, kBreathBandHi);
    auto z_ab = fft::analytic_band(abd, rate_hz, kBreathBandLo, kBreathBandHi);

    MetricSeries out = make_series(MetricKind::Phi, rate_hz, n);
    // The spectral analytic signal rings near the epoch edges; guard both ends.
    const size_t guard = window_samples(5.0, rate_hz);
    for (size_t i = 0; i < n; ++i) {
        double dphi = std::arg(z_rc[i]) - std::arg(z_ab[i]);
        while (dphi > pi) dphi -= 2.0 * pi;
        while (dphi < -pi) dphi += 2.0 * pi;
        out.values[i] = std::abs(dphi) * 180.0 / pi;
        out.valid[i] = (i >= guard && i + guard < n) ? 1 : 0;
    }
    return out;
}

MetricSeries movement_power(std::span<const double> x, double rate_hz, MetricKind kind,
                            const WindowConfig& cfg) {
    require(kind == MetricKind::BmpRc || kind == MetricKind::BmpAb, CRX_E_INVALID_ARG,
            "movement_power: kind must be bmp_rc or bmp_ab");
    const size_t n = x.size();
    const size_t short_n = window_samples(cfg.short_s, rate_hz);
    require(n >= short_n, CRX_E_TOO_SHORT, "movement_power: signal too short");

    auto mvt = fft::bandpass(x, rate_hz, kMovementBandLo, kMovementBandHi, false, false);
    auto brd = fft::bandpass(x, rate_hz, kBreathBandLo, kBreathBandHi, true, true);
    auto p_mvt = trailing_mean_square(mvt, short_n);
    auto p_brd = trailing_mean_square(brd, short_n);

    MetricSeries out = make_series(kind, rate_hz, n);
    for (size_t i = short_n - 1; i < n; ++i) {
        out.values[i] = p_mvt[i] / (p_brd[i] + kBmpEpsilon);
        out.valid[i] = 1;
    }
    return out;
}

MetricSeries rf_cf_correlation(const MetricSeries& rf, const MetricSeries& cf,
                               const WindowConfig& cfg) {
    require(rf.size() == cf.size() && rf.rate_hz == cf.rate_hz, CRX_E_LENGTH_MISMATCH,
            "rf_cf_correlation: series do not share a timebase");
    const size_t n = rf.size();
    const size_t w = window_samples(cfg.corr_s, rf.rate_hz);
    require(n >= w, CRX_E_TOO_SHORT, "rf_cf_correlation: series too short");

    std::vector<double> sx(n + 1, 0.0), sy(n + 1, 0.0), sxx(n + 1, 0.0), syy(n + 1, 0.0),
        sxy(n + 1, 0.0), valid_count(n + 1, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const double x = rf.values[i];
        const double y = cf.values[i];
        sx[i + 1] = sx[i] + x;
        sy[i + 1] = sy[i] + y;
        sxx[i + 1] = sxx[i] + x * x;
        syy[i + 1] = syy[i] + y * y;
        sxy[i + 1] = sxy[i] + x * y;
        valid_count[i + 1] = valid_count[i] + ((rf.valid[i] && cf.valid[i]) ? 1.0 : 0.0);
    }

    MetricSeries out = make_series(MetricKind::RhoRfCf, rf.rate_hz, n);
    const auto wn = static_cast<double>(w);
    for (size_t i = w - 1; i < n; ++i) {
        const size_t a = i + 1 - w;
        if (valid_count[i + 1] - valid_count[a] < wn) continue;  // inputs incomplete
        const double mx = (sx[i + 1] - sx[a]) / wn;
        const double my = (sy[i + 1] - sy[a]) / wn;
        const double vx = std::max(0.0, (sxx[i + 1] - sxx[a]) / wn - mx * mx);
        const double vy = std::max(0.0, (syy[i + 1] - syy[a]) / wn - my * my);
        const double cov = (sxy[i + 1] - sxy[a]) / wn - mx * my;
        // prefix-sum cancellation leaves ~1e-13 relative residue on exactly
        // constant windows; treat those as constant
        const double tol_x = 1e-12 * std::max(1.0, mx * mx);
        const double tol_y = 1e-12 * std::max(1.0, my * my);
        out.valid[i] = 1;
        if (vx <= tol_x || vy <= tol_y) {
            out.values[i] = 0.0;
        } else {
            out.values[i] = std::clamp(cov / std::sqrt(vx * vy), -1.0, 1.0);
        }
    }
    return out;
}

}  // namespace crx
