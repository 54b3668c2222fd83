#include "patterns.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace crx {

namespace {

constexpr double kBradycardiaBpm = 100.0;
constexpr double kDesaturationPct = 85.0;

// Centered median over up to `width` label codes. Odd windows return an
// element of the window, so the result is always one of the input labels;
// edges shrink the window symmetrically.
std::vector<RespLabel> median_smooth(const std::vector<RespLabel>& in, size_t width) {
    if (width < 3 || in.size() < 3) return in;
    if (width % 2 == 0) ++width;
    const size_t half = width / 2;
    const size_t n = in.size();
    std::vector<RespLabel> out(n);
    std::array<int, kNumRespLabels> hist{};
    for (size_t i = 0; i < n; ++i) {
        const size_t a = i >= half ? i - half : 0;
        const size_t b = std::min(n - 1, i + half);
        const size_t reach = std::min(i - a, b - i);  // keep the window symmetric
        hist.fill(0);
        for (size_t k = i - reach; k <= i + reach; ++k)
            ++hist[static_cast<int>(in[k])];
        const int target = static_cast<int>(reach) + 1;  // (2*reach+1+1)/2
        int cum = 0;
        for (int l = 0; l < kNumRespLabels; ++l) {
            cum += hist[l];
            if (cum >= target) {
                out[i] = static_cast<RespLabel>(l);
                break;
            }
        }
    }
    return out;
}

}  // namespace

const char* pattern_name(PatternKind p) {
    switch (p) {
        case PatternKind::Pau: return "pau";
        case PatternKind::Mvt: return "mvt";
        case PatternKind::Syb: return "syb";
        case PatternKind::Asb: return "asb";
        case PatternKind::Bdy: return "bdy";
        case PatternKind::Dst: return "dst";
    }
    return "?";
}

std::vector<RespLabel> segment_respiration(const MetricSeries& rp_rc,
                                           const MetricSeries& rp_ab,
                                           const MetricSeries& bmp_rc,
                                           const MetricSeries& bmp_ab,
                                           const MetricSeries& phi,
                                           const PatternThresholds& thr) {
    const size_t n = rp_rc.size();
    require(rp_ab.size() == n && bmp_rc.size() == n && bmp_ab.size() == n &&
                phi.size() == n,
            CRX_E_LENGTH_MISMATCH, "segment_respiration: metric tracks differ in length");

    std::vector<RespLabel> labels(n, RespLabel::Syb);
    for (size_t i = 0; i < n; ++i) {
        if (bmp_rc.values[i] > thr.theta_mvt || bmp_ab.values[i] > thr.theta_mvt)
            labels[i] = RespLabel::Mvt;
        else if (rp_rc.values[i] < thr.theta_pau && rp_ab.values[i] < thr.theta_pau)
            labels[i] = RespLabel::Pau;
        else if (phi.values[i] > thr.theta_phase_deg)
            labels[i] = RespLabel::Asb;
        else
            labels[i] = RespLabel::Syb;
    }

    if (thr.smooth_s > 0.0) {
        const auto w = static_cast<size_t>(std::llround(thr.smooth_s * rp_rc.rate_hz));
        labels = median_smooth(labels, w);
    }
    return labels;
}

std::vector<uint8_t> detect_bradycardia(const MetricSeries& hr_bpm,
                                        std::span<const uint8_t> artifact_mask) {
    const size_t n = hr_bpm.size();
    require(artifact_mask.size() == n, CRX_E_LENGTH_MISMATCH,
            "detect_bradycardia: mask length mismatch");
    std::vector<uint8_t> out(n, 0);
    for (size_t i = 0; i < n; ++i)
        out[i] = (hr_bpm.values[i] < kBradycardiaBpm && !artifact_mask[i]) ? 1 : 0;
    return out;
}

std::vector<uint8_t> detect_desaturation(std::span<const double> sat,
                                         std::span<const uint8_t> ppg_artifact) {
    const size_t n = sat.size();
    require(ppg_artifact.size() == n, CRX_E_LENGTH_MISMATCH,
            "detect_desaturation: mask length mismatch");
    std::vector<uint8_t> out(n, 0);
    for (size_t i = 0; i < n; ++i)
        out[i] = (sat[i] < kDesaturationPct && !ppg_artifact[i]) ? 1 : 0;
    return out;
}

std::vector<uint8_t> ppg_artifact_mask(std::span<const double> ppg, double rate_hz,
                                       const WindowConfig& windows, double theta_mvt) {
    auto bmp = movement_power(ppg, rate_hz, MetricKind::BmpRc, windows);
    std::vector<uint8_t> out(bmp.size(), 0);
    for (size_t i = 0; i < bmp.size(); ++i)
        out[i] = (bmp.valid[i] && bmp.values[i] > theta_mvt) ? 1 : 0;
    return out;
}

std::array<PatternStats, kNumPatterns> pattern_stats(std::span<const RespLabel> labels,
                                                     std::span<const uint8_t> bdy,
                                                     std::span<const uint8_t> dst,
                                                     double rate_hz, double total_s) {
    const size_t n = labels.size();
    require(n > 0, CRX_E_EMPTY_INPUT, "pattern_stats: empty labeling");
    require(bdy.size() == n && dst.size() == n, CRX_E_LENGTH_MISMATCH,
            "pattern_stats: event tracks differ in length");
    require(total_s > 0.0, CRX_E_EMPTY_INPUT, "pattern_stats: total time must be positive");

    std::array<PatternStats, kNumPatterns> out{};

    // A pattern occurrence is a maximal run of identical labels (or of
    // consecutive true samples on an event track).
    auto scan = [&](auto&& active) {
        std::array<long, kNumPatterns> count{}, total_n{};
        std::array<long, kNumPatterns> max_n{};
        int current = -1;
        long run = 0;
        auto close_run = [&](int p) {
            if (p < 0) return;
            ++count[p];
            total_n[p] += run;
            max_n[p] = std::max(max_n[p], run);
        };
        for (size_t i = 0; i < n; ++i) {
            const int p = active(i);
            if (p == current) {
                ++run;
            } else {
                close_run(current);
                current = p;
                run = 1;
            }
        }
        close_run(current);
        return std::tuple(count, total_n, max_n);
    };

    auto [rc, rt, rm] = scan([&](size_t i) { return static_cast<int>(labels[i]); });
    auto [bc, bt, bm] = scan([&](size_t i) { return bdy[i] ? static_cast<int>(PatternKind::Bdy) : -1; });
    auto [dc, dt2, dm] = scan([&](size_t i) { return dst[i] ? static_cast<int>(PatternKind::Dst) : -1; });

    for (int p = 0; p < kNumPatterns; ++p) {
        long c = rc[p] + bc[p] + dc[p];
        long tot = rt[p] + bt[p] + dt2[p];
        long mx = std::max({rm[p], bm[p], dm[p]});
        out[p].count = static_cast<double>(c);
        out[p].total_s = static_cast<double>(tot) / rate_hz;
        out[p].max_s = static_cast<double>(mx) / rate_hz;
        out[p].density = out[p].total_s / total_s;
        out[p].freq_per_s = out[p].count / total_s;
    }
    return out;
}

}  // namespace crx
