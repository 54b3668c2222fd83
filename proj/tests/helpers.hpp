#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "rng.hpp"
#include "signals.hpp"

namespace crxtest {

// Self-deleting scratch directory for file-based tests.
class TempDir {
public:
    TempDir() {
        auto tmpl = (std::filesystem::temp_directory_path() / "crx_test_XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
        path_ = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const {
        return (std::filesystem::path(path_) / name).string();
    }
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

inline std::vector<double> make_sine(size_t n, double rate_hz, double freq_hz,
                                     double amp = 1.0, double phase_rad = 0.0) {
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i)
        x[i] = amp * std::sin(2.0 * std::numbers::pi * freq_hz *
                                  (static_cast<double>(i) / rate_hz) +
                              phase_rad);
    return x;
}

// Least-squares amplitude of a known-frequency sinusoid; the analytic
// oracle used by the resampling tests.
inline double fit_sine_amplitude(const std::vector<double>& x, double rate_hz,
                                 double freq_hz) {
    double c = 0.0, s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double t = static_cast<double>(i) / rate_hz;
        c += x[i] * std::cos(2.0 * std::numbers::pi * freq_hz * t);
        s += x[i] * std::sin(2.0 * std::numbers::pi * freq_hz * t);
    }
    const double n2 = static_cast<double>(x.size()) / 2.0;
    return std::sqrt((c / n2) * (c / n2) + (s / n2) * (s / n2));
}

inline double rms_of(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s / static_cast<double>(x.size()));
}

// Test-side ECG generator with exact ground-truth peak times, independent
// of the cohort synthesizer.
struct EcgTruth {
    std::vector<double> signal;
    std::vector<double> peak_times_s;
};

inline EcgTruth make_ecg(double bpm, double duration_s, double rate_hz,
                         double rr_jitter_frac, double wander_hz, double wander_amp,
                         crx::Rng& rng) {
    EcgTruth out;
    const auto n = static_cast<size_t>(std::llround(duration_s * rate_hz));
    out.signal.assign(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate_hz;
        out.signal[i] = wander_amp * std::sin(2.0 * std::numbers::pi * wander_hz * t);
    }
    auto stamp = [&](double center, double amp, double sigma) {
        const double half = 4.0 * sigma;
        const auto i0 = static_cast<long>(std::floor((center - half) * rate_hz));
        const auto i1 = static_cast<long>(std::ceil((center + half) * rate_hz));
        for (long i = std::max<long>(0, i0); i <= i1 && i < static_cast<long>(n); ++i) {
            const double u = (static_cast<double>(i) / rate_hz - center) / sigma;
            out.signal[static_cast<size_t>(i)] += amp * std::exp(-u * u);
        }
    };
    const double rr0 = 60.0 / bpm;
    for (double t = 0.4; t < duration_s - 0.4;) {
        // snap the truth to the sample grid so +-20 ms checks are exact
        const double tp = std::round(t * rate_hz) / rate_hz;
        out.peak_times_s.push_back(tp);
        stamp(tp - 0.028, -0.15, 0.008);
        stamp(tp, 1.0, 0.010);
        stamp(tp + 0.028, -0.20, 0.008);
        stamp(tp + 0.16, 0.18, 0.040);
        t += rr0 * (1.0 + rr_jitter_frac * rng.normal());
    }
    return out;
}

// Writes a five-channel signal CSV at the given rate from caller-provided
// channel vectors (all must share one length).
inline void write_signal_file(const std::string& path, double rate_hz,
                              const std::vector<double>& rcg,
                              const std::vector<double>& abd,
                              const std::vector<double>& ecg,
                              const std::vector<double>& ppg,
                              const std::vector<double>& sat) {
    std::ofstream out(path);
    out << "t,rcg,abd,ecg,ppg,sat\n";
    char buf[64];
    for (size_t i = 0; i < rcg.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(i) / rate_hz);
        out << buf << ',' << rcg[i] << ',' << abd[i] << ',' << ecg[i] << ',' << ppg[i]
            << ',' << sat[i] << '\n';
    }
}

// A tiny in-memory recording with constant-ish channels, used where only
// the structure matters.
inline crx::Recording make_recording(const std::string& id, double rate_hz,
                                     double total_s, crx::Span imv, crx::Span ett) {
    crx::Recording rec;
    rec.patient_id = id;
    rec.imv = imv;
    rec.ettcpap = ett;
    const auto n = static_cast<size_t>(std::llround(total_s * rate_hz));
    for (int c = 0; c < crx::kNumChannels; ++c) {
        rec.channels[c].rate_hz = rate_hz;
        rec.channels[c].samples.assign(n, static_cast<double>(c) + 0.5);
    }
    return rec;
}

}  // namespace crxtest
