#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "errors.hpp"

namespace crx {

namespace {

using std::numbers::pi;

constexpr double kRulePositiveFraction = 0.40;
constexpr double kRulePositiveFailureCap = 0.03;  // keeps exceeders ~97% success
// Rule-positive (older/larger) infants who fail tend to fail for reasons the
// cardiorespiratory channels do not show; their signature gate is damped.
constexpr double kRulePositiveSignatureFactor = 0.3;

struct TimedEvent {
    double start_s = 0.0;
    double dur_s = 0.0;
    double level = 0.0;  // event-specific meaning
    double freq_hz = 0.0;
    double phase = 0.0;
};

// Smooth 0..1 envelope with cosine ramps at both ends.
double event_envelope(double t, const TimedEvent& ev, double ramp_s) {
    const double rel = t - ev.start_s;
    if (rel < 0.0 || rel > ev.dur_s) return 0.0;
    if (rel < ramp_s) return 0.5 - 0.5 * std::cos(pi * rel / ramp_s);
    if (rel > ev.dur_s - ramp_s)
        return 0.5 - 0.5 * std::cos(pi * (ev.dur_s - rel) / ramp_s);
    return 1.0;
}

std::string patient_id_for(unsigned index, unsigned n) {
    unsigned width = 3;
    for (unsigned v = n; v >= 1000; v /= 10) ++width;
    std::string digits = std::to_string(index + 1);
    return "p" + std::string(width - std::min<size_t>(width, digits.size()), '0') + digits;
}

// Per-patient generator state; every draw order below is fixed so that a
// given (seed, patient index) always produces the same signals.
struct PatientDraw {
    double breath_f0, drift_phase, amp_rc, amp_ab, phase_base_rad;
    double hr0_bpm, rr_jitter, sat_base;
    double wander_phase;
    std::vector<TimedEvent> movement;  // bursts on RCG/ABD/PPG
    std::vector<TimedEvent> pauses;    // breathing amplitude dropouts
    std::vector<TimedEvent> brady;     // heart-rate dips, level = bpm
    std::vector<TimedEvent> desat;     // SAT dips, level = %
    double phase_extra_rad = 0.0;
    bool sig_pauses = false, sig_phase = false, sig_brady = false, sig_desat = false;
};

PatientDraw draw_patient(Rng& rng, const SynthParams& p, bool is_failure,
                         bool rule_positive) {
    PatientDraw d;
    const double total_s = p.imv_s + p.ettcpap_s;
    const double ett0 = p.imv_s;
    const double ett1 = total_s;

    d.breath_f0 = rng.uniform(0.55, 1.10);
    d.drift_phase = rng.uniform(0.0, 2.0 * pi);
    d.amp_rc = rng.uniform(0.8, 1.2);
    d.amp_ab = rng.uniform(0.8, 1.2);
    d.phase_base_rad = std::min(std::abs(rng.normal(0.0, 12.0)), 45.0) * pi / 180.0;
    d.hr0_bpm = rng.uniform(130.0, 170.0);
    d.rr_jitter = rng.uniform(0.005, 0.02);
    d.sat_base = rng.uniform(94.0, 98.5);
    d.wander_phase = rng.uniform(0.0, 2.0 * pi);

    // Background events, identical for both classes.
    const int n_mvt = rng.poisson(1.0);
    for (int i = 0; i < n_mvt; ++i) {
        TimedEvent ev;
        ev.start_s = rng.uniform(10.0, total_s - 12.0);
        ev.dur_s = rng.uniform(3.0, 8.0);
        ev.level = rng.uniform(2.5, 4.0);
        ev.freq_hz = rng.uniform(0.15, 0.35);
        ev.phase = rng.uniform(0.0, 2.0 * pi);
        d.movement.push_back(ev);
    }
    if (rng.uniform01() < 0.45) {
        const int n = 1 + rng.poisson(0.6);
        for (int i = 0; i < n; ++i) {
            TimedEvent ev;
            ev.start_s = rng.uniform(ett0 + 70.0, ett1 - 25.0);
            ev.dur_s = rng.uniform(3.0, 7.0);
            d.pauses.push_back(ev);
        }
    }
    if (rng.uniform01() < 0.18) {
        TimedEvent ev;
        ev.start_s = rng.uniform(ett0 + 70.0, ett1 - 25.0);
        ev.dur_s = rng.uniform(4.0, 8.0);
        ev.level = rng.uniform(82.5, 85.5);
        d.desat.push_back(ev);
    }
    if (rng.uniform01() < 0.10) {
        TimedEvent ev;
        ev.start_s = rng.uniform(ett0 + 70.0, ett1 - 25.0);
        ev.dur_s = rng.uniform(6.0, 12.0);
        ev.level = rng.uniform(90.0, 99.0);
        d.brady.push_back(ev);
    }

    // Failure signatures, each gated by an independent separability draw.
    if (is_failure) {
        double gate = std::min(p.separability, 1.0);
        if (rule_positive) gate *= kRulePositiveSignatureFactor;
        if (rng.uniform01() < gate) {
            d.sig_pauses = true;
            const int n = 1 + rng.poisson(0.8);
            for (int i = 0; i < n; ++i) {
                TimedEvent ev;
                ev.start_s = rng.uniform(ett0 + 65.0, ett1 - 25.0);
                ev.dur_s = rng.uniform(4.0, 9.0);
                d.pauses.push_back(ev);
            }
        }
        if (rng.uniform01() < gate) {
            d.sig_phase = true;
            d.phase_extra_rad = rng.uniform(35.0, 100.0) * pi / 180.0;
        }
        if (rng.uniform01() < gate) {
            d.sig_brady = true;
            const int n = 1 + rng.poisson(0.5);
            for (int i = 0; i < n; ++i) {
                TimedEvent ev;
                ev.start_s = rng.uniform(ett0 + 65.0, ett1 - 30.0);
                ev.dur_s = rng.uniform(8.0, 20.0);
                ev.level = rng.uniform(84.0, 101.0);
                d.brady.push_back(ev);
            }
        }
        if (rng.uniform01() < gate) {
            d.sig_desat = true;
            const int n = 1 + rng.poisson(0.5);
            for (int i = 0; i < n; ++i) {
                TimedEvent ev;
                ev.start_s = rng.uniform(ett0 + 65.0, ett1 - 30.0);
                ev.dur_s = rng.uniform(8.0, 20.0);
                ev.level = rng.uniform(80.0, 86.0);
                d.desat.push_back(ev);
            }
        }
    }
    return d;
}

}  // namespace

std::vector<PatientPlan> plan_cohort(const SynthParams& p) {
    require(p.n_patients >= 1, CRX_E_INVALID_ARG, "synth: need at least 1 patient");
    require(p.failure_rate > 0.0 && p.failure_rate < 1.0, CRX_E_INVALID_RATE,
            "synth: failure_rate must lie strictly between 0 and 1");
    require(p.separability >= 0.0, CRX_E_INVALID_ARG,
            "synth: separability must be nonnegative");
    require(p.source_rate_hz > 0, CRX_E_INVALID_RATE, "synth: bad source rate");

    const unsigned n = p.n_patients;
    const auto n_fail = static_cast<unsigned>(std::llround(n * p.failure_rate));

    Rng label_rng = Rng::stream(p.seed, 1);
    auto perm = label_rng.permutation(n);
    std::vector<bool> failure(n, false);
    for (unsigned i = 0; i < n_fail && i < n; ++i) failure[perm[i]] = true;

    // Rule-positive assignment, exact counts.
    const auto n_rp = static_cast<unsigned>(std::llround(kRulePositiveFraction * n));
    const auto rp_fail_cap =
        static_cast<unsigned>(std::floor(kRulePositiveFailureCap * n_rp));
    const unsigned n_rp_f = std::min(rp_fail_cap, n_fail);
    const unsigned n_rp_s = std::min(n_rp - n_rp_f, n - n_fail);

    std::vector<size_t> fail_idx, succ_idx;
    for (unsigned i = 0; i < n; ++i) (failure[i] ? fail_idx : succ_idx).push_back(i);
    Rng rule_rng = Rng::stream(p.seed, 2);
    rule_rng.shuffle(fail_idx);
    rule_rng.shuffle(succ_idx);
    std::vector<bool> rule_positive(n, false);
    for (unsigned i = 0; i < n_rp_f; ++i) rule_positive[fail_idx[i]] = true;
    for (unsigned i = 0; i < n_rp_s; ++i) rule_positive[succ_idx[i]] = true;

    std::vector<PatientPlan> plans(n);
    for (unsigned i = 0; i < n; ++i) {
        PatientPlan& plan = plans[i];
        plan.id = patient_id_for(i, n);
        plan.stream_id = 1000 + i;
        plan.rule_positive = rule_positive[i];
        plan.clinical.patient_id = plan.id;
        plan.clinical.outcome = failure[i] ? Outcome::Failure : Outcome::Success;

        Rng clin_rng = Rng::stream(p.seed, 500000 + i);
        if (rule_positive[i]) {
            plan.clinical.ga_weeks = clin_rng.uniform(27.0, 30.5);
            plan.clinical.bw_g = clin_rng.uniform(750.0, 1250.0);
        } else {
            plan.clinical.ga_weeks = clin_rng.uniform(23.5, 26.8);
            plan.clinical.bw_g = clin_rng.uniform(550.0, 1000.0);
        }
    }
    return plans;
}

SynthProfile synth_profile(const SynthParams& p, const PatientPlan& plan) {
    Rng rng = Rng::stream(p.seed, plan.stream_id);
    const PatientDraw d =
        draw_patient(rng, p, plan.clinical.outcome == Outcome::Failure, plan.rule_positive);
    SynthProfile s;
    s.breath_f0 = d.breath_f0;
    s.phase_base_rad = d.phase_base_rad;
    s.phase_extra_rad = d.phase_extra_rad;
    s.hr0_bpm = d.hr0_bpm;
    s.sat_base = d.sat_base;
    s.n_pauses = static_cast<int>(d.pauses.size());
    s.n_movement = static_cast<int>(d.movement.size());
    s.n_brady = static_cast<int>(d.brady.size());
    s.n_desat = static_cast<int>(d.desat.size());
    s.sig_pauses = d.sig_pauses;
    s.sig_phase = d.sig_phase;
    s.sig_brady = d.sig_brady;
    s.sig_desat = d.sig_desat;
    return s;
}

Recording synth_recording(const SynthParams& p, const PatientPlan& plan) {
    Rng rng = Rng::stream(p.seed, plan.stream_id);
    const bool is_failure = plan.clinical.outcome == Outcome::Failure;
    PatientDraw d = draw_patient(rng, p, is_failure, plan.rule_positive);

    const double rate = p.source_rate_hz;
    const double dt = 1.0 / rate;
    const double total_s = p.imv_s + p.ettcpap_s;
    const auto n = static_cast<size_t>(std::llround(total_s * rate));

    Recording rec;
    rec.patient_id = plan.id;
    rec.imv = {0.0, p.imv_s};
    rec.ettcpap = {p.imv_s, total_s};
    for (auto& ch : rec.channels) {
        ch.rate_hz = rate;
        ch.samples.assign(n, 0.0);
    }
    auto& rcg = rec.channel(ChannelKind::Rcg).samples;
    auto& abd = rec.channel(ChannelKind::Abd).samples;
    auto& ecg = rec.channel(ChannelKind::Ecg).samples;
    auto& ppg = rec.channel(ChannelKind::Ppg).samples;
    auto& sat = rec.channel(ChannelKind::Sat).samples;

    // --- heart beat times (shared by ECG and PPG) ---
    auto hr_at = [&](double t) {
        double hr = d.hr0_bpm;
        for (const auto& ev : d.brady) {
            const double e = event_envelope(t, ev, 2.0);
            hr = hr * (1.0 - e) + ev.level * e;
        }
        return hr;
    };
    std::vector<double> beats;
    for (double t = 0.25; t < total_s - 0.3;) {
        beats.push_back(t);
        double rr = 60.0 / hr_at(t);
        rr *= 1.0 + d.rr_jitter * rng.normal();
        t += std::clamp(rr, 0.25, 1.2);
    }

    // --- breathing phase (slow frequency drift) and event tracks ---
    const double phase_offset = d.phase_base_rad + d.phase_extra_rad;
    double theta = rng.uniform(0.0, 2.0 * pi);
    for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double f = d.breath_f0 * (1.0 + 0.04 * std::sin(2.0 * pi * t / 97.0 + d.drift_phase));
        theta += 2.0 * pi * f * dt;

        double pause_env = 1.0;
        for (const auto& ev : d.pauses)
            pause_env = std::min(pause_env, 1.0 - 0.97 * event_envelope(t, ev, 1.5));
        double movement = 0.0;
        for (const auto& ev : d.movement)
            movement += ev.level * event_envelope(t, ev, 1.0) *
                        std::sin(2.0 * pi * ev.freq_hz * t + ev.phase);

        rcg[i] = d.amp_rc * pause_env * std::sin(theta) + movement + 0.05 * rng.normal();
        abd[i] = d.amp_ab * pause_env * std::sin(theta - phase_offset) +
                 0.9 * movement + 0.05 * rng.normal();
        ppg[i] = 0.6 * movement;  // motion couples into the photoplethysmogram

        double s = d.sat_base + 0.35 * std::sin(2.0 * pi * 0.05 * t + d.wander_phase);
        for (const auto& ev : d.desat) {
            const double e = event_envelope(t, ev, 2.0);
            s = s * (1.0 - e) + ev.level * e;
        }
        sat[i] = std::clamp(s + 0.05 * rng.normal(), 70.0, 100.0);

        ecg[i] = 0.08 * std::sin(2.0 * pi * 0.28 * t + d.wander_phase) + 0.02 * rng.normal();
    }

    // --- stamp cardiac waveforms around each beat ---
    auto stamp = [&](std::vector<double>& sig, double center_s, double amp, double sigma_s) {
        const double half = 4.0 * sigma_s;
        const auto i0 = static_cast<long>(std::floor((center_s - half) * rate));
        const auto i1 = static_cast<long>(std::ceil((center_s + half) * rate));
        for (long i = std::max<long>(i0, 0); i <= i1 && i < static_cast<long>(n); ++i) {
            const double u = (static_cast<double>(i) * dt - center_s) / sigma_s;
            sig[static_cast<size_t>(i)] += amp * std::exp(-u * u);
        }
    };
    for (double b : beats) {
        stamp(ecg, b - 0.18, 0.08, 0.030);   // P
        stamp(ecg, b - 0.028, -0.15, 0.008); // Q
        stamp(ecg, b, 1.0, 0.010);           // R
        stamp(ecg, b + 0.028, -0.20, 0.008); // S
        stamp(ecg, b + 0.16, 0.18, 0.040);   // T
        stamp(ppg, b + 0.15, 1.0, 0.090);    // pulse arrival
    }

    return rec;
}

}  // namespace crx
