#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rng.hpp"
#include "signals.hpp"

namespace crx {

// Seeded synthetic cohort generator. Signals are parametric: band-limited
// breathing on RCG/ABD, a QRS train on ECG, a pulsatile PPG and a slowly
// varying SAT. Failure patients additionally receive, each with probability
// min(separability, 1), injected breathing pauses, extra thoraco-abdominal
// phase, bradycardia dips and desaturations; at separability 0 the two
// classes are statistically identical. Everything is a pure function of
// (params, patient index).
struct SynthParams {
    unsigned n_patients = 0;
    double failure_rate = 0.15;   // must lie in (0, 1)
    double separability = 1.0;    // >= 0
    uint64_t seed = 0;
    double source_rate_hz = 200.0;
    double imv_s = 60.0;
    double ettcpap_s = 300.0;  // generated spans are always exactly this long
};

struct PatientPlan {
    std::string id;
    ClinicalRecord clinical;
    bool rule_positive = false;
    uint64_t stream_id = 0;
};

// Labels, clinical values and rng streams for the whole cohort. Outcome
// counts are exact: round(n * failure_rate) failures. Roughly 40% of
// patients satisfy the ga/bw rule and at least 90% of those are successes,
// both by construction.
std::vector<PatientPlan> plan_cohort(const SynthParams& params);

// The five synthesized channels for one planned patient.
Recording synth_recording(const SynthParams& params, const PatientPlan& plan);

// Summary of the generative draw behind a patient's signals; the flags
// report which failure signatures were actually injected.
struct SynthProfile {
    double breath_f0 = 0.0;
    double phase_base_rad = 0.0;
    double phase_extra_rad = 0.0;
    double hr0_bpm = 0.0;
    double sat_base = 0.0;
    int n_pauses = 0;
    int n_movement = 0;
    int n_brady = 0;
    int n_desat = 0;
    bool sig_pauses = false;
    bool sig_phase = false;
    bool sig_brady = false;
    bool sig_desat = false;

    bool any_signature() const { return sig_pauses || sig_phase || sig_brady || sig_desat; }
};

SynthProfile synth_profile(const SynthParams& params, const PatientPlan& plan);

}  // namespace crx
